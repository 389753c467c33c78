//! Accuracy, Matthews correlation, and repeated-run evaluation of a reducer.

use std::fs;
use std::path::Path;

use crate::dataio::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::{self, TrainConfig};
use crate::par::Execution;
use crate::pipeline::{Fingerprint, FitOptions, FittedReducer, ReducerSpec};

fn check_binary(predictions: &[u8], labels: &[u8]) -> Result<()> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions, {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions"));
    }
    if predictions.iter().chain(labels).any(|&v| v > 1) {
        return Err(Error::invalid("values must be 0 or 1"));
    }
    Ok(())
}

/// `(TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN))`, or 0 when any
/// factor of the denominator is zero.
pub fn matthews_corr(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_binary(predictions, labels)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (0, 0) => tn += 1,
            (1, 0) => fp += 1,
            _ => fn_ += 1,
        }
    }
    let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / denom.sqrt())
}

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_binary(predictions, labels)?;
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub accuracy: f64,
    pub matthews: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub spec: ReducerSpec,
    pub fingerprint: Fingerprint,
    /// Sorted by seed.
    pub runs: Vec<RunRecord>,
    pub mean_accuracy: f64,
    pub mean_matthews: f64,
}

pub const REPORT_HEADER: &str = "spec,isomap_dim,pca_dim,k,seed,accuracy,matthews";

impl EvalReport {
    fn from_runs(spec: ReducerSpec, fingerprint: Fingerprint, mut runs: Vec<RunRecord>) -> Self {
        runs.sort_by_key(|r| r.seed);
        let n = runs.len() as f64;
        let mean_accuracy = runs.iter().map(|r| r.accuracy).sum::<f64>() / n;
        let mean_matthews = runs.iter().map(|r| r.matthews).sum::<f64>() / n;
        Self {
            spec,
            fingerprint,
            runs,
            mean_accuracy,
            mean_matthews,
        }
    }

    /// One row per run plus a summary row whose seed column reads `mean`.
    pub fn to_csv(&self) -> String {
        let (iso, pca) = self.spec.block_dims();
        let prefix = format!("{},{iso},{pca},{}", self.spec.kind, self.spec.k_neighbors);
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.runs {
            out.push_str(&format!(
                "{prefix},{},{:.6},{:.6}\n",
                r.seed, r.accuracy, r.matthews
            ));
        }
        out.push_str(&format!(
            "{prefix},mean,{:.6},{:.6}\n",
            self.mean_accuracy, self.mean_matthews
        ));
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Trains one classifier per seed on the reduced training split and scores
/// each on the reduced evaluation split.
pub fn evaluate_fitted(
    reducer: &FittedReducer,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    seeds: &[u64],
    exec: Execution,
) -> Result<EvalReport> {
    split.require_labels()?;
    if seeds.is_empty() {
        return Err(Error::invalid("at least one run is required"));
    }
    let train = reducer.transform_with(&split.train, exec)?;
    let eval = reducer.transform_with(&split.eval, exec)?;
    let labels = split.eval.require_labels()?;
    let runs: Result<Vec<RunRecord>> = exec
        .map_range(seeds.len(), |i| {
            let run_cfg = TrainConfig {
                seed: seeds[i],
                ..cfg.clone()
            };
            let clf = model::train(&train, &run_cfg)?;
            let pred = clf.classify(&eval)?;
            Ok(RunRecord {
                seed: seeds[i],
                accuracy: accuracy(&pred, labels)?,
                matthews: matthews_corr(&pred, labels)?,
            })
        })
        .into_iter()
        .collect();
    Ok(EvalReport::from_runs(
        reducer.spec().clone(),
        reducer.fingerprint().clone(),
        runs?,
    ))
}

/// Fits the reducer once on `split.train`, then trains `n_runs` classifiers
/// with seeds `cfg.seed, cfg.seed + 1, …`.
pub fn evaluate(
    spec: &ReducerSpec,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    n_runs: usize,
) -> Result<EvalReport> {
    evaluate_with(spec, split, cfg, n_runs, &FitOptions::default())
}

pub fn evaluate_with(
    spec: &ReducerSpec,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    n_runs: usize,
    opts: &FitOptions,
) -> Result<EvalReport> {
    split.require_labels()?;
    let reducer = FittedReducer::fit_with(spec, &split.train, opts)?;
    let seeds: Vec<u64> = (0..n_runs as u64)
        .map(|r| cfg.seed.wrapping_add(r))
        .collect();
    evaluate_fitted(&reducer, split, cfg, &seeds, opts.exec)
}
