//! Parameter sweeps producing plot-ready CSV.

use crate::dataio::DatasetSplit;
use crate::error::Result;
use crate::metrics::{evaluate_with, EvalReport};
use crate::model::TrainConfig;
use crate::pipeline::{quarter_splits, FitOptions, ReducerSpec};

pub const PCA_SWEEP_DIMS: [usize; 5] = [16, 32, 64, 128, 256];
pub const SWEEP_HEADER: &str = "dim_or_split,mean_accuracy,mean_matthews";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SweepPlan {
    PcaDims(Vec<usize>),
    /// `(isomap_dim, pca_dim)` pairs.
    ConcatSplits(Vec<(usize, usize)>),
}

impl SweepPlan {
    pub fn default_pca_dims() -> Self {
        SweepPlan::PcaDims(PCA_SWEEP_DIMS.to_vec())
    }

    /// The five quarter splits of `total`.
    pub fn default_concat_splits(total: usize) -> Self {
        SweepPlan::ConcatSplits(quarter_splits(total))
    }

    /// Row labels and reducer specs, in sweep order.
    pub fn specs(&self, k: usize) -> Vec<(String, ReducerSpec)> {
        match self {
            SweepPlan::PcaDims(dims) => dims
                .iter()
                .map(|&d| (d.to_string(), ReducerSpec::pca(d)))
                .collect(),
            SweepPlan::ConcatSplits(splits) => splits
                .iter()
                .map(|&(iso, pca)| (format!("{iso}/{pca}"), ReducerSpec::concat(iso, pca, k)))
                .collect(),
        }
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub label: String,
    pub spec: ReducerSpec,
    pub outcome: Result<EvalReport>,
}

/// Evaluates every point of the plan. A failing point is kept as an error
/// row; the remaining points still run.
pub fn run_sweep(
    plan: &SweepPlan,
    k: usize,
    zscore: bool,
    split: &DatasetSplit,
    cfg: &TrainConfig,
    n_runs: usize,
    opts: &FitOptions,
) -> Vec<SweepRow> {
    plan.specs(k)
        .into_iter()
        .map(|(label, mut spec)| {
            spec.zscore = zscore;
            let outcome = evaluate_with(&spec, split, cfg, n_runs, opts);
            SweepRow {
                label,
                spec,
                outcome,
            }
        })
        .collect()
}

/// Failed rows carry `NaN` metrics.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(r) => out.push_str(&format!(
                "{},{:.6},{:.6}\n",
                row.label, r.mean_accuracy, r.mean_matthews
            )),
            Err(_) => out.push_str(&format!("{},NaN,NaN\n", row.label)),
        }
    }
    out
}
