//! Synthetic manifolds with known ground truth.
//!
//! All generators draw from [`SplitMix64`] so a seed produces the same data
//! on every platform.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::dataio::{DatasetSplit, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Height of the Swiss roll.
pub const SWISS_ROLL_HEIGHT: f64 = 21.0;

#[derive(Clone, Debug)]
pub struct ManifoldSample {
    pub dataset: EmbeddingDataset,
    /// Ground-truth manifold coordinates, one row per dataset row.
    pub latent: Array2<f64>,
}

impl ManifoldSample {
    /// CSV with header `row,z0,z1,...`.
    pub fn write_latent_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("row");
        for j in 0..self.latent.ncols() {
            out.push_str(&format!(",z{j}"));
        }
        out.push('\n');
        for (i, row) in self.latent.outer_iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Arc length of the spiral `(t cos t, t sin t)` from 0 to `t`.
pub fn spiral_arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Swiss roll `(t cos t, h, t sin t)` with `t` uniform in `[1.5π, 4.5π]`,
/// `h` uniform in `[0, 21]` and isotropic Gaussian noise. The latent
/// column is the arc length from the inner end of the roll.
pub fn gen_swiss_roll(n: usize, noise: f64, seed: u64) -> Result<ManifoldSample> {
    if n < 10 {
        return Err(Error::invalid(format!(
            "swiss roll needs n >= 10 (got {n})"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::invalid(format!("noise must be >= 0 (got {noise})")));
    }
    let mut rng = SplitMix64::new(seed);
    let t0 = 1.5 * PI;
    let s0 = spiral_arc_length(t0);
    let mut x = Array2::zeros((n, 3));
    let mut latent = Array2::zeros((n, 1));
    for i in 0..n {
        let t = rng.uniform(t0, 4.5 * PI);
        let h = rng.uniform(0.0, SWISS_ROLL_HEIGHT);
        let clean = [t * t.cos(), h, t * t.sin()];
        for (j, c) in clean.iter().enumerate() {
            x[[i, j]] = c + noise * rng.normal();
        }
        latent[[i, 0]] = spiral_arc_length(t) - s0;
    }
    Ok(ManifoldSample {
        dataset: EmbeddingDataset::unlabeled(x)?,
        latent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lift {
    /// Latent coordinates are the data (requires `ambient_dim == 2`).
    Identity,
    /// `x = R·p + cos(W·p + φ)` with Gaussian `R`, `W` and uniform phases.
    RandomWarp,
}

#[derive(Clone, Copy, Debug)]
pub struct MoonsConfig {
    pub n: usize,
    pub ambient_dim: usize,
    /// Gaussian noise added to the 2-d moon coordinates.
    pub latent_noise: f64,
    /// Gaussian noise added after lifting.
    pub ambient_noise: f64,
    /// Scale of `W`; larger values bend the lifted surface more.
    pub warp_frequency: f64,
    pub lift: Lift,
    pub seed: u64,
}

impl MoonsConfig {
    pub fn new(n: usize, ambient_dim: usize, seed: u64) -> Self {
        Self {
            n,
            ambient_dim,
            latent_noise: 0.1,
            ambient_noise: 0.05,
            warp_frequency: 1.0,
            lift: Lift::RandomWarp,
            seed,
        }
    }
}

pub fn gen_lifted_moons(n: usize, ambient_dim: usize, seed: u64) -> Result<ManifoldSample> {
    gen_lifted_moons_with(&MoonsConfig::new(n, ambient_dim, seed))
}

/// Two interleaved half-moons in the plane, lifted into `ambient_dim`
/// dimensions. Row `i` belongs to moon `i % 2`, which is also its label.
pub fn gen_lifted_moons_with(cfg: &MoonsConfig) -> Result<ManifoldSample> {
    let (n, dim) = (cfg.n, cfg.ambient_dim);
    if n < 2 {
        return Err(Error::invalid(format!("moons need n >= 2 (got {n})")));
    }
    if dim < 2 {
        return Err(Error::invalid(format!(
            "ambient dimension must be >= 2 (got {dim})"
        )));
    }
    if cfg.lift == Lift::Identity && dim != 2 {
        return Err(Error::invalid("identity lift requires ambient dimension 2"));
    }
    for v in [cfg.latent_noise, cfg.ambient_noise] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("noise must be >= 0 (got {v})")));
        }
    }
    let mut rng = SplitMix64::new(cfg.seed);
    // The lift is drawn first so it depends on the seed only.
    let (r, w, phase) = match cfg.lift {
        Lift::Identity => (Array2::eye(2), Array2::zeros((2, 2)), Array1::zeros(2)),
        Lift::RandomWarp => {
            let r = Array2::from_shape_fn((dim, 2), |_| rng.normal());
            let w = Array2::from_shape_fn((dim, 2), |_| cfg.warp_frequency * rng.normal());
            let phase = Array1::from_shape_fn(dim, |_| rng.uniform(0.0, 2.0 * PI));
            (r, w, phase)
        }
    };

    let mut latent = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let theta = rng.uniform(0.0, PI);
        let (px, py) = if label == 0 {
            (theta.cos(), theta.sin())
        } else {
            (1.0 - theta.cos(), 0.5 - theta.sin())
        };
        latent[[i, 0]] = px + cfg.latent_noise * rng.normal();
        latent[[i, 1]] = py + cfg.latent_noise * rng.normal();
        labels.push(label);
    }

    let mut x = latent.dot(&r.t());
    if cfg.lift == Lift::RandomWarp {
        let arg = latent.dot(&w.t()) + &phase;
        x = x + arg.mapv(f64::cos);
    }
    if cfg.ambient_noise > 0.0 {
        x.mapv_inplace(|v| v + cfg.ambient_noise * rng.normal());
    }
    Ok(ManifoldSample {
        dataset: EmbeddingDataset::new(x, Some(labels), None)?,
        latent,
    })
}

/// Evenly spaced (then jittered) points on a random line through a random
/// offset. The latent column is the position along the line.
pub fn gen_line(n: usize, ambient_dim: usize, seed: u64) -> Result<ManifoldSample> {
    if n < 2 || ambient_dim < 1 {
        return Err(Error::invalid(format!(
            "line needs n >= 2 and ambient_dim >= 1 (got {n}, {ambient_dim})"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let dir = Array1::from_shape_fn(ambient_dim, |_| rng.normal());
    let dir = &dir / dir.dot(&dir).sqrt();
    let offset = Array1::from_shape_fn(ambient_dim, |_| rng.normal());
    let ts: Vec<f64> = (0..n).map(|i| i as f64 + rng.uniform(0.0, 0.5)).collect();
    let x = Array2::from_shape_fn((n, ambient_dim), |(i, j)| offset[j] + ts[i] * dir[j]);
    let latent = Array2::from_shape_vec((n, 1), ts).expect("n entries");
    Ok(ManifoldSample {
        dataset: EmbeddingDataset::unlabeled(x)?,
        latent,
    })
}

/// Seeded shuffle of the rows, then the first `1 - eval_fraction` of them
/// for training and the rest for evaluation.
pub fn train_eval_split(
    ds: &EmbeddingDataset,
    eval_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "eval fraction must lie in (0, 1) (got {eval_fraction})"
        )));
    }
    let n = ds.n();
    let n_eval = ((n as f64) * eval_fraction).round() as usize;
    if n_eval == 0 || n_eval == n {
        return Err(Error::invalid(format!(
            "cannot split {n} rows with fraction {eval_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let (train_rows, eval_rows) = order.split_at(n - n_eval);
    DatasetSplit::new(ds.select_rows(train_rows)?, ds.select_rows(eval_rows)?)
}
