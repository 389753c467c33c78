//! `geoc`: fit reducers, evaluate compressed embeddings, run sweeps and
//! generate synthetic fixtures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use geoc::geodesic::DEFAULT_MEMORY_LIMIT;
use geoc::neighbors::DEFAULT_K;
use geoc::{Error, Format};

#[derive(Parser, Debug)]
#[command(
    name = "geoc",
    version,
    about = "Compress embedding vectors with PCA, Isomap or both, and score the result"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Seed for every random choice (initialization, shuffling, generators)
    #[arg(long, global = true, default_value_t = 17)]
    pub seed: u64,
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "GEOC_THREADS")]
    pub threads: Option<usize>,
    /// `key = value` file of flag defaults; explicit flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dataset file format [default: csv for *.csv, binary otherwise]
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Binary => Format::Binary,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a reducer on a training set and save it
    Reduce(ReduceArgs),
    /// Train and score classifiers on reduced embeddings
    Eval(EvalArgs),
    /// Evaluate a family of reducers and write one CSV row per point
    Sweep(SweepArgs),
    /// Write a synthetic dataset
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Pca,
    Isomap,
    Concat,
}

/// Flags describing a reducer.
#[derive(Args, Debug, Clone)]
pub struct SpecArgs {
    /// Reducer kind
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    /// Output dimension for pca and isomap
    #[arg(long)]
    pub dim: Option<usize>,
    /// Isomap block dimension for concat
    #[arg(long)]
    pub isomap_dim: Option<usize>,
    /// PCA block dimension for concat
    #[arg(long)]
    pub pca_dim: Option<usize>,
    /// Neighborhood size of the Isomap graph
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Neighbors used to attach new points [default: same as --k]
    #[arg(long)]
    pub entry_k: Option<usize>,
    /// Z-score every output column with training statistics
    #[arg(long)]
    pub zscore: bool,
    /// Abort when the geodesic matrix would exceed this many bytes
    #[arg(long, default_value_t = DEFAULT_MEMORY_LIMIT)]
    pub memory_limit: u64,
}

/// Classifier training flags.
#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// Independent training runs to average
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Passes over the training set per run
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Mini-batch size
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Training dataset
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Reducer file to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Write the reduced training set here
    #[arg(long, value_name = "PATH")]
    pub train_out: Option<PathBuf>,
    /// Dataset to reduce with the fitted reducer (requires --apply-out)
    #[arg(long, value_name = "PATH", requires = "apply_out")]
    pub apply: Option<PathBuf>,
    /// Where to write the reduced --apply dataset
    #[arg(long, value_name = "PATH", requires = "apply")]
    pub apply_out: Option<PathBuf>,
    /// Write the neighborhood graph as an edge-list CSV
    #[arg(long, value_name = "PATH")]
    pub dump_graph: Option<PathBuf>,
    /// Write the geodesic distance matrix as a dataset
    #[arg(long, value_name = "PATH")]
    pub dump_geodesics: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Saved reducer; when absent the reducer is fitted from the spec flags
    #[arg(long, value_name = "PATH")]
    pub reducer: Option<PathBuf>,
    #[command(flatten)]
    pub spec: SpecArgs,
    #[command(flatten)]
    pub training: TrainArgs,
    /// Labeled training dataset
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Labeled evaluation dataset
    #[arg(long, value_name = "PATH")]
    pub eval: PathBuf,
    /// Per-run report CSV
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    PcaDims,
    ConcatSplits,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitFamily {
    /// Isomap share 0, 1/4, 1/2, 3/4, 1
    Quarters,
    /// Isomap:PCA ratios 1:0, 8:1, 4:1, 8:3, 2:1
    Eighths,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// What to sweep
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// PCA dimensions for pca-dims
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
    pub dims: Vec<usize>,
    /// Total dimension for concat-splits
    #[arg(long, default_value_t = 64)]
    pub total: usize,
    /// Split family for concat-splits
    #[arg(long, value_enum, default_value_t = SplitFamily::Quarters)]
    pub splits: SplitFamily,
    /// Explicit ISOMAP/PCA splits, e.g. `8/56,24/40`; overrides --splits
    #[arg(long, value_delimiter = ',', value_name = "ISO/PCA")]
    pub custom_splits: Vec<String>,
    /// Neighborhood size for the Isomap blocks
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Z-score every output column with training statistics
    #[arg(long)]
    pub zscore: bool,
    /// Abort a point when its geodesic matrix would exceed this many bytes
    #[arg(long, default_value_t = DEFAULT_MEMORY_LIMIT)]
    pub memory_limit: u64,
    #[command(flatten)]
    pub training: TrainArgs,
    /// Labeled training dataset
    #[arg(long, value_name = "PATH")]
    pub train: PathBuf,
    /// Labeled evaluation dataset
    #[arg(long, value_name = "PATH")]
    pub eval: PathBuf,
    /// Sweep CSV to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    SwissRoll,
    Moons,
    Line,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Generator
    #[arg(long, value_enum)]
    pub kind: Generator,
    /// Number of points
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Ambient dimension (moons and line; the Swiss roll is always 3-d)
    #[arg(long, default_value_t = 768)]
    pub dim: usize,
    /// Gaussian noise (Swiss roll only)
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Dataset to write (the training part when --eval-out is given)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Ground-truth manifold coordinates as CSV
    #[arg(long, value_name = "PATH")]
    pub latent: Option<PathBuf>,
    /// Hold out a seeded random subset here
    #[arg(long, value_name = "PATH", requires = "eval_fraction")]
    pub eval_out: Option<PathBuf>,
    /// Fraction of rows for --eval-out
    #[arg(long, requires = "eval_out")]
    pub eval_fraction: Option<f64>,
}

/// Exit statuses.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const RESOURCE: u8 = 4;
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MemoryCeiling { .. } => exit::RESOURCE,
        Error::Disconnected { .. } | Error::NotSymmetric { .. } => exit::NUMERICAL,
        e if e.is_numerical() => exit::NUMERICAL,
        _ => exit::USAGE,
    }
}

fn main() -> ExitCode {
    let cmd = Cli::command();
    let args = match config::expand(&cmd, std::env::args().collect()) {
        Ok(a) => a,
        Err(config::ConfigError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(exit::USAGE);
        }
    };
    let cli = match cmd
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Err(msg) = configure_threads(cli.global.threads) {
        eprintln!("error: {msg}");
        return ExitCode::from(exit::USAGE);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), String> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err("--threads must be at least 1".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    Ok(())
}
