//! Downstream classifier: one hidden layer of 64 ReLU units and a logistic
//! output, trained on mean binary cross-entropy with Adam.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const HIDDEN_UNITS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 50,
            batch_size: 32,
            seed: 17,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and >= 0 (got {})",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!(
                    "{name} must lie in [0, 1) (got {b})"
                )));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return Err(Error::invalid("adam epsilon must be > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(format!(
                "batch size {} must lie in 1..={n}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpClassifier {
    /// `input_dim × 64`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    pub rng_seed: u64,
}

/// Parameter gradients, same shapes as the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct Forward {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array1<f64>,
}

impl MlpClassifier {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input_dim: usize, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        Self::init_from(input_dim, seed, &mut rng)
    }

    fn init_from(input_dim: usize, seed: u64, rng: &mut SplitMix64) -> Self {
        let a1 = (6.0 / (input_dim + HIDDEN_UNITS) as f64).sqrt();
        let a2 = (6.0 / (HIDDEN_UNITS + 1) as f64).sqrt();
        let w1 = Array2::from_shape_fn((input_dim, HIDDEN_UNITS), |_| rng.uniform(-a1, a1));
        let w2 = Array1::from_shape_fn(HIDDEN_UNITS, |_| rng.uniform(-a2, a2));
        Self {
            w1,
            b1: Array1::zeros(HIDDEN_UNITS),
            w2,
            b2: 0.0,
            rng_seed: seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    fn forward(&self, x: ArrayView2<f64>) -> Forward {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&self.w2) + self.b2;
        Forward {
            pre,
            hidden,
            logits,
        }
    }

    fn check_dim(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Probabilities of class 1, clamped to the open interval (0, 1).
    pub fn predict_matrix(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let hi = 1.0 - f64::EPSILON / 2.0;
        Ok(self
            .forward(x)
            .logits
            .iter()
            .map(|&z| sigmoid(z).clamp(f64::MIN_POSITIVE, hi))
            .collect())
    }

    pub fn predict(&self, ds: &EmbeddingDataset) -> Result<Vec<f64>> {
        self.predict_matrix(ds.vectors().view())
    }

    /// Hard labels at threshold 0.5.
    pub fn classify(&self, ds: &EmbeddingDataset) -> Result<Vec<u8>> {
        Ok(self
            .predict(ds)?
            .into_iter()
            .map(|p| u8::from(p >= 0.5))
            .collect())
    }

    /// Mean binary cross-entropy.
    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
        let f = self.forward(x);
        f.logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<f64>()
            / x.nrows() as f64
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn gradients(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let f = self.forward(x);
        let loss = f
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum::<f64>()
            / n;
        let dz: Array1<f64> = f
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| (sigmoid(z) - t) / n)
            .collect();
        let w2 = f.hidden.t().dot(&dz);
        let b2 = dz.sum();
        let mut dh = dz
            .view()
            .insert_axis(Axis(1))
            .dot(&self.w2.view().insert_axis(Axis(0)));
        dh.zip_mut_with(&f.pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = x.t().dot(&dh);
        let b1 = dh.sum_axis(Axis(0));
        (loss, Gradients { w1, b1, w2, b2 })
    }

    fn all_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .all(|v| v.is_finite())
            && self.b2.is_finite()
    }

    /// Smallest |pre-activation| over a batch; gradient checks need this
    /// away from zero.
    pub fn min_abs_preactivation(&self, x: ArrayView2<f64>) -> f64 {
        self.forward(x)
            .pre
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

/// Adam moments for one parameter tensor.
struct Moments<D: ndarray::Dimension> {
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: ndarray::Dimension> Moments<D> {
    fn new(shape: D) -> Self {
        Self {
            m: ndarray::Array::zeros(shape.clone()),
            v: ndarray::Array::zeros(shape),
        }
    }

    fn step(
        &mut self,
        param: &mut ndarray::Array<f64, D>,
        grad: &ndarray::Array<f64, D>,
        cfg: &TrainConfig,
        c1: f64,
        c2: f64,
    ) {
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        ndarray::Zip::from(param)
            .and(grad)
            .and(&mut self.m)
            .and(&mut self.v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            });
    }
}

/// Per-epoch mean training loss alongside the trained model.
pub struct TrainOutcome {
    pub model: MlpClassifier,
    pub epoch_losses: Vec<f64>,
}

pub fn train(train_ds: &EmbeddingDataset, cfg: &TrainConfig) -> Result<MlpClassifier> {
    Ok(train_with_history(train_ds, cfg)?.model)
}

/// Mini-batch Adam with bias-corrected moments. The rows are reshuffled at
/// the start of every epoch; initialization and shuffles share one
/// generator seeded with `cfg.seed`, so the result is a pure function of
/// `(data, cfg)`.
pub fn train_with_history(train_ds: &EmbeddingDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let labels = train_ds.require_labels()?;
    let n = train_ds.n();
    cfg.validate(n)?;
    let x = train_ds.vectors();
    let y = Array1::from_iter(labels.iter().map(|&l| l as f64));

    let mut rng = SplitMix64::new(cfg.seed);
    let mut model = MlpClassifier::init_from(train_ds.d(), cfg.seed, &mut rng);
    let mut mw1 = Moments::new(model.w1.raw_dim());
    let mut mb1 = Moments::new(model.b1.raw_dim());
    let mut mw2 = Moments::new(model.w2.raw_dim());
    let mut mb2 = Moments::new(ndarray::Ix0());
    let mut b2 = ndarray::arr0(model.b2);

    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0i32;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for (batch, rows) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), rows);
            let yb = y.select(Axis(0), rows);
            let (loss, g) = model.gradients(xb.view(), yb.view());
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            total += loss * rows.len() as f64;

            step += 1;
            let c1 = 1.0 - cfg.adam_beta1.powi(step);
            let c2 = 1.0 - cfg.adam_beta2.powi(step);
            mw1.step(&mut model.w1, &g.w1, cfg, c1, c2);
            mb1.step(&mut model.b1, &g.b1, cfg, c1, c2);
            mw2.step(&mut model.w2, &g.w2, cfg, c1, c2);
            b2[()] = model.b2;
            mb2.step(&mut b2, &ndarray::arr0(g.b2), cfg, c1, c2);
            model.b2 = b2[()];
            if !model.all_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
        }
        epoch_losses.push(total / n as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}

pub fn predict(m: &MlpClassifier, ds: &EmbeddingDataset) -> Result<Vec<f64>> {
    m.predict(ds)
}

/// Largest relative difference between analytic gradients and central
/// finite differences (step 1e-5) over all parameters.
///
/// Each entry contributes `|a - f| / max(|a|, |f|, 1e-6)`. The floor keeps
/// near-zero gradients, where finite-difference round-off (about
/// `ε·loss/step ≈ 1e-11`) dominates, from reporting spurious large ratios.
pub fn gradient_check(m: &MlpClassifier, x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = m.gradients(x, y);
    let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-6);
    let numeric = |perturb: &dyn Fn(&mut MlpClassifier, f64)| {
        let mut plus = m.clone();
        perturb(&mut plus, STEP);
        let mut minus = m.clone();
        perturb(&mut minus, -STEP);
        (plus.loss(x, y) - minus.loss(x, y)) / (2.0 * STEP)
    };

    let mut worst = 0.0f64;
    for ((i, j), &a) in analytic.w1.indexed_iter() {
        worst = worst.max(rel(a, numeric(&|mm, h| mm.w1[[i, j]] += h)));
    }
    for (j, &a) in analytic.b1.indexed_iter() {
        worst = worst.max(rel(a, numeric(&|mm, h| mm.b1[j] += h)));
    }
    for (j, &a) in analytic.w2.indexed_iter() {
        worst = worst.max(rel(a, numeric(&|mm, h| mm.w2[j] += h)));
    }
    worst.max(rel(analytic.b2, numeric(&|mm, h| mm.b2 += h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Two Gaussian blobs at ±(2, 2) with unit-free margin.
    pub(crate) fn blobs(n: usize, seed: u64) -> EmbeddingDataset {
        let mut rng = SplitMix64::new(seed);
        let mut x = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let l = (i % 2) as u8;
            let c = if l == 1 { 2.0 } else { -2.0 };
            x[[i, 0]] = c + 0.5 * rng.normal();
            x[[i, 1]] = c + 0.5 * rng.normal();
            labels.push(l);
        }
        EmbeddingDataset::new(x, Some(labels), None).unwrap()
    }

    fn accuracy(m: &MlpClassifier, ds: &EmbeddingDataset) -> f64 {
        let pred = m.classify(ds).unwrap();
        let hits = pred
            .iter()
            .zip(ds.labels().unwrap())
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / ds.n() as f64
    }

    #[test]
    fn separable_blobs() {
        let cfg = TrainConfig::default();
        let train_ds = blobs(200, 1);
        let out = train_with_history(&train_ds, &cfg).unwrap();
        assert!(accuracy(&out.model, &train_ds) >= 0.99);
        assert!(accuracy(&out.model, &blobs(200, 2)) >= 0.98);
        let l = &out.epoch_losses;
        assert!((1..5).all(|e| l[e] < l[e - 1]), "{l:?}");
    }

    #[test]
    fn constant_labels() {
        let base = blobs(64, 3);
        let ds = EmbeddingDataset::new(base.vectors().clone(), Some(vec![1; 64]), None).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let out = train_with_history(&ds, &cfg).unwrap();
        assert!(out.epoch_losses.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.model.predict(&ds).unwrap().iter().all(|&p| p > 0.95));
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = blobs(16, 4);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 1,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let m = train(&ds, &cfg).unwrap();
        assert_eq!(m, MlpClassifier::init(2, cfg.seed));
    }

    #[test]
    fn deterministic() {
        let ds = blobs(50, 5);
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert_eq!(train(&ds, &cfg).unwrap(), train(&ds, &cfg).unwrap());
    }

    #[test]
    fn zero_model_predicts_sigmoid_bias() {
        let mut m = MlpClassifier::init(3, 0);
        m.w1.fill(0.0);
        m.w2.fill(0.0);
        m.b2 = 0.7;
        let x = array![[1.0, 2.0, 3.0], [-4.0, 0.0, 9.0]];
        let p = m.predict_matrix(x.view()).unwrap();
        assert!(p.iter().all(|&v| v == sigmoid(0.7)));
    }

    #[test]
    fn batch_splitting_invariance() {
        let ds = blobs(10, 6);
        let m = MlpClassifier::init(2, 9);
        let all = m.predict(&ds).unwrap();
        let a = m
            .predict(&ds.select_rows(&[0, 1, 2, 3, 4]).unwrap())
            .unwrap();
        let b = m
            .predict(&ds.select_rows(&[5, 6, 7, 8, 9]).unwrap())
            .unwrap();
        assert_eq!(all, [a, b].concat());
    }

    #[test]
    fn gradient_check_bias_terms_on_zero_batch() {
        let m = MlpClassifier::init(4, 2);
        let x = Array2::zeros((3, 4));
        let y = Array1::zeros(3);
        let (_, g) = m.gradients(x.view(), y.view());
        // Zero inputs: every pre-activation is b1 = 0, so hidden units are
        // off and only b2 has a gradient.
        let h = 1e-5;
        let mut plus = m.clone();
        plus.b2 += h;
        let mut minus = m.clone();
        minus.b2 -= h;
        let numeric = (plus.loss(x.view(), y.view()) - minus.loss(x.view(), y.view())) / (2.0 * h);
        assert!((g.b2 - numeric).abs() <= 1e-6);
        assert!((g.b2 - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn errors() {
        let ds = blobs(10, 7);
        let unlabeled = EmbeddingDataset::unlabeled(ds.vectors().clone()).unwrap();
        assert!(matches!(
            train(&unlabeled, &TrainConfig::default()),
            Err(Error::MissingLabels)
        ));
        let big_batch = TrainConfig {
            batch_size: 11,
            ..TrainConfig::default()
        };
        assert!(train(&ds, &big_batch).is_err());
        let m = MlpClassifier::init(3, 0);
        assert!(m.predict(&ds).is_err());
        let blowup = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let wild =
            EmbeddingDataset::new(ds.vectors() * 1e150, ds.labels().map(<[u8]>::to_vec), None)
                .unwrap();
        assert!(matches!(train(&wild, &blowup), Err(Error::Diverged { .. })));
    }
}
