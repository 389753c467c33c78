//! Compression of high-dimensional embedding vectors with PCA, Isomap and
//! their concatenation, plus the small downstream classifier and metrics
//! used to score the compressed vectors.
//!
//! The numerically heavy loops (pairwise distances, all-pairs shortest
//! paths, Gram matrix assembly, repeated training runs) go through
//! [`par::Execution`], which runs on rayon when the `parallel` feature is
//! enabled and sequentially otherwise. Both paths produce bit-identical
//! output.

mod codec;
pub mod dataio;
pub mod error;
pub mod geodesic;
pub mod isomap;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod neighbors;
pub mod par;
pub mod pca;
pub mod pipeline;
pub mod rng;
pub mod sweep;
pub mod synth;

pub use dataio::{DatasetSplit, EmbeddingDataset, Format};
pub use error::{Error, Result};
pub use geodesic::GeodesicMatrix;
pub use isomap::IsomapModel;
pub use metrics::EvalReport;
pub use model::{MlpClassifier, TrainConfig};
pub use neighbors::NeighborGraph;
pub use par::Execution;
pub use pca::PcaModel;
pub use pipeline::{FittedReducer, ReducerKind, ReducerSpec};
