//! Principal component analysis via the sample covariance matrix.

use ndarray::{Array1, Array2};

use crate::codec::{ByteReader, ByteWriter};
use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::linalg::{center_columns, top_k_symmetric_eigen};

/// Fitted projection onto the top `m` principal directions.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    /// `d × m`, orthonormal columns.
    components: Array2<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn fit(train: &EmbeddingDataset, m: usize) -> Result<Self> {
        let (n, d) = (train.n(), train.d());
        if n < 2 {
            return Err(Error::invalid(format!(
                "PCA needs at least 2 training rows (got {n})"
            )));
        }
        if m == 0 || m > n.min(d) {
            return Err(Error::invalid(format!(
                "PCA dimension {m} must lie in 1..={}",
                n.min(d)
            )));
        }
        let (centered, mean) = center_columns(train.vectors())?;
        let mut cov = centered.t().dot(&centered) / (n - 1) as f64;
        // Exact symmetry regardless of how the product was accumulated.
        let cov_t = cov.t().to_owned();
        cov = (&cov + &cov_t) * 0.5;
        let eig = top_k_symmetric_eigen(&cov, m)?;
        let explained_variance = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        Ok(Self {
            mean,
            components: eig.eigenvectors,
            explained_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn components(&self) -> &Array2<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn project(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok((x - &self.mean).dot(&self.components))
    }

    pub fn transform(&self, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
        ds.with_vectors(self.project(ds.vectors())?)
    }

    /// Maps projected coordinates back to input space.
    pub fn inverse_transform(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: y.ncols(),
            });
        }
        Ok(y.dot(&self.components.t()) + &self.mean)
    }

    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        w.usize(self.input_dim());
        w.usize(self.output_dim());
        w.f64s(self.mean.iter());
        w.f64s(self.components.iter());
        w.f64s(self.explained_variance.iter());
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let d = r.usize()?;
        let m = r.usize()?;
        if m == 0 || m > d {
            return Err(Error::Corrupted(format!("PCA shape {d}x{m}")));
        }
        Ok(Self {
            mean: r.array1(d)?,
            components: r.array2(d, m)?,
            explained_variance: r.f64_vec(m)?,
        })
    }
}

pub fn pca_fit(train: &EmbeddingDataset, m: usize) -> Result<PcaModel> {
    PcaModel::fit(train, m)
}

pub fn pca_transform(model: &PcaModel, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
    model.transform(ds)
}
