use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `row` is the zero-based data row, when known.
    #[error("{}", match .row {
        Some(r) => format!("parse error at row {r}: {msg}"),
        None => format!("parse error: {msg}"),
    })]
    Parse { row: Option<usize>, msg: String },

    /// Wrong magic bytes or an unsupported format version.
    #[error("unsupported file: {0}")]
    Version(String),

    #[error("corrupted container: {0}")]
    Corrupted(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("labels required")]
    MissingLabels,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("requested {requested} dimensions but only {available} positive eigenvalues exist")]
    InsufficientSpectrum { requested: usize, available: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },

    #[error("memory ceiling exceeded: need {required} bytes, limit {limit} bytes")]
    MemoryCeiling { required: u64, limit: u64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Diverged { .. }
                | Error::InsufficientSpectrum { .. }
        )
    }
}
