//! Isomap: classical MDS on the geodesic distance matrix, with Nyström
//! out-of-sample projection.
//!
//! Fitting double-centers the squared geodesic matrix,
//! `B = -1/2 · J·D²·J` with `J = I - 11ᵀ/n`, and keeps the top `m`
//! strictly positive eigenpairs `(λ, v)`. Training coordinates are
//! `y_i = √λ · v_i`.
//!
//! A new point `x` enters the graph through edges to its `entry_k` nearest
//! training rows. Its geodesic distances `δ` come from the virtual-vertex
//! formula in [`crate::geodesic`], are centered the same way as `B`, and are
//! projected with `c = (1/√λ) · Σ_i v_i · k̃_i`. For a training row this
//! reproduces its fitted coordinates exactly.

use ndarray::{Array1, Array2};

use crate::codec::{ByteReader, ByteWriter};
use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::geodesic::{self, GeodesicMatrix, DEFAULT_MEMORY_LIMIT};
use crate::linalg::{top_k_symmetric_eigen_with, EigenOptions};
use crate::neighbors::{self, euclidean, NeighborGraph, DEFAULT_K};
use crate::par::Execution;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const POSITIVE_EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct IsomapOptions {
    pub k: usize,
    /// Neighbors used to attach out-of-sample points; defaults to `k`.
    pub entry_k: Option<usize>,
    pub exec: Execution,
    pub memory_limit: u64,
    pub eigen: EigenOptions,
}

impl Default for IsomapOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            entry_k: None,
            exec: Execution::default(),
            memory_limit: DEFAULT_MEMORY_LIMIT,
            eigen: EigenOptions::default(),
        }
    }
}

impl IsomapOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Classical MDS of a distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MdsEmbedding {
    pub row_mean_sq: Array1<f64>,
    pub grand_mean_sq: f64,
    pub eigenvalues: Vec<f64>,
    /// `n × m`.
    pub eigenvectors: Array2<f64>,
}

impl MdsEmbedding {
    /// `√λ_c · v_c` for each retained pair.
    pub fn coordinates(&self) -> Array2<f64> {
        let mut y = self.eigenvectors.clone();
        for (mut col, &lam) in y.columns_mut().into_iter().zip(&self.eigenvalues) {
            col *= lam.sqrt();
        }
        y
    }
}

/// Row means of the squared distances and their overall mean.
pub fn squared_means(distances: &Array2<f64>) -> (Array1<f64>, f64) {
    let n = distances.nrows();
    let row_mean_sq = Array1::from_iter(
        distances
            .outer_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>() / n as f64),
    );
    let grand = row_mean_sq.sum() / n as f64;
    (row_mean_sq, grand)
}

/// `B = -1/2 · J·D²·J`, built element-wise and exactly symmetric.
pub fn double_center(distances: &Array2<f64>, exec: Execution) -> Array2<f64> {
    let n = distances.nrows();
    let (row_mean_sq, grand) = squared_means(distances);
    let mut flat = vec![0.0; n * n];
    exec.fill_chunks(&mut flat, n.max(1), |i, row| {
        for (j, b) in row.iter_mut().enumerate() {
            let d = distances[[i, j]];
            *b = -0.5 * (d * d - (row_mean_sq[i] + row_mean_sq[j]) + grand);
        }
    });
    Array2::from_shape_vec((n, n), flat).expect("n*n entries")
}

/// Embeds a symmetric distance matrix into `m` dimensions.
pub fn classical_mds(
    distances: &Array2<f64>,
    m: usize,
    exec: Execution,
    eigen: &EigenOptions,
) -> Result<MdsEmbedding> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::invalid("distance matrix must be square"));
    }
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "target dimension {m} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let b = double_center(distances, exec);
    let eig = top_k_symmetric_eigen_with(&b, m, eigen)?;
    let floor = POSITIVE_EIGEN_TOL * eig.eigenvalues[0].max(0.0);
    let available = eig
        .eigenvalues
        .iter()
        .take_while(|&&l| l > 0.0 && l > floor)
        .count();
    if available < m {
        return Err(Error::InsufficientSpectrum {
            requested: m,
            available,
        });
    }
    let (row_mean_sq, grand_mean_sq) = squared_means(distances);
    Ok(MdsEmbedding {
        row_mean_sq,
        grand_mean_sq,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsomapModel {
    train_vectors: Array2<f64>,
    graph: NeighborGraph,
    geodesics: GeodesicMatrix,
    mds: MdsEmbedding,
    entry_k: usize,
}

impl IsomapModel {
    pub fn fit(train: &EmbeddingDataset, m: usize, k: usize) -> Result<Self> {
        Self::fit_with(train, m, &IsomapOptions::with_k(k))
    }

    pub fn fit_with(train: &EmbeddingDataset, m: usize, opts: &IsomapOptions) -> Result<Self> {
        let n = train.n();
        if m == 0 || m >= n {
            return Err(Error::invalid(format!(
                "Isomap dimension {m} must lie in 1..={}",
                n.saturating_sub(1)
            )));
        }
        let entry_k = opts.entry_k.unwrap_or(opts.k);
        if entry_k == 0 || entry_k > n {
            return Err(Error::invalid(format!(
                "entry neighbor count {entry_k} must lie in 1..={n}"
            )));
        }
        let graph = neighbors::build_knn_graph_with(train, opts.k, opts.exec)?;
        let geodesics = geodesic::all_pairs_geodesic_with(&graph, opts.exec, opts.memory_limit)?;
        let mds = classical_mds(geodesics.distances(), m, opts.exec, &opts.eigen)?;
        Ok(Self {
            train_vectors: train.vectors().clone(),
            graph,
            geodesics,
            mds,
            entry_k,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.train_vectors.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.mds.eigenvalues.len()
    }

    pub fn n_train(&self) -> usize {
        self.train_vectors.nrows()
    }

    pub fn k(&self) -> usize {
        self.graph.k()
    }

    pub fn entry_k(&self) -> usize {
        self.entry_k
    }

    pub fn graph(&self) -> &NeighborGraph {
        &self.graph
    }

    pub fn geodesics(&self) -> &GeodesicMatrix {
        &self.geodesics
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.mds.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.mds.eigenvectors
    }

    pub fn row_mean_sq(&self) -> &Array1<f64> {
        &self.mds.row_mean_sq
    }

    pub fn grand_mean_sq(&self) -> f64 {
        self.mds.grand_mean_sq
    }

    /// Fitted coordinates of the training rows, `n × m`.
    pub fn training_embedding(&self) -> Array2<f64> {
        self.mds.coordinates()
    }

    /// The `entry_k` nearest training rows of `x` (ties to lower index).
    pub fn entry_edges(&self, x: ndarray::ArrayView1<f64>) -> Vec<(usize, f64)> {
        let mut cand: Vec<(f64, usize)> = self
            .train_vectors
            .outer_iter()
            .enumerate()
            .map(|(i, row)| (euclidean(x, row), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let keep = self.entry_k.min(cand.len());
        if keep < cand.len() {
            cand.select_nth_unstable_by(keep - 1, order);
            cand.truncate(keep);
        }
        cand.sort_by(order);
        cand.into_iter().map(|(w, i)| (i, w)).collect()
    }

    fn project_point(&self, x: ndarray::ArrayView1<f64>) -> Vec<f64> {
        let n = self.n_train();
        let entries = self.entry_edges(x);
        let delta = geodesic::single_source_geodesic(&self.geodesics, &entries)
            .expect("entry_k >= 1 and indices in range");
        let delta_sq: Vec<f64> = delta.iter().map(|v| v * v).collect();
        let mean_sq = delta_sq.iter().sum::<f64>() / n as f64;
        let kernel: Vec<f64> = delta_sq
            .iter()
            .zip(self.mds.row_mean_sq.iter())
            .map(|(&d2, &r)| -0.5 * (d2 - (r + mean_sq) + self.mds.grand_mean_sq))
            .collect();
        self.mds
            .eigenvalues
            .iter()
            .zip(self.mds.eigenvectors.columns())
            .map(|(&lam, v)| {
                let dot: f64 = v.iter().zip(&kernel).map(|(a, b)| a * b).sum();
                dot / lam.sqrt()
            })
            .collect()
    }

    pub fn project(&self, x: &Array2<f64>, exec: Execution) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let m = self.output_dim();
        let mut flat = vec![0.0; x.nrows() * m];
        exec.fill_chunks(&mut flat, m, |i, out| {
            out.copy_from_slice(&self.project_point(x.row(i)));
        });
        Ok(Array2::from_shape_vec((x.nrows(), m), flat).expect("rows*m entries"))
    }

    pub fn transform(&self, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
        self.transform_with(ds, Execution::default())
    }

    pub fn transform_with(
        &self,
        ds: &EmbeddingDataset,
        exec: Execution,
    ) -> Result<EmbeddingDataset> {
        ds.with_vectors(self.project(ds.vectors(), exec)?)
    }

    /// Model payload: shapes, training vectors, graph edges, centering terms
    /// and eigenpairs. The geodesic matrix is not stored; decoding recomputes
    /// it from the graph, which yields the same values bit for bit.
    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        let (n, d) = self.train_vectors.dim();
        w.usize(n);
        w.usize(d);
        w.usize(self.graph.k());
        w.usize(self.entry_k);
        w.usize(self.output_dim());
        w.f64s(self.train_vectors.iter());
        let edges: Vec<_> = self.graph.edges().collect();
        w.usize(edges.len());
        for (i, j, wt) in edges {
            w.usize(i);
            w.usize(j);
            w.f64(wt);
        }
        w.usize(self.graph.bridged_edges().len());
        for &(i, j, wt) in self.graph.bridged_edges() {
            w.usize(i);
            w.usize(j);
            w.f64(wt);
        }
        w.f64s(self.mds.row_mean_sq.iter());
        w.f64(self.mds.grand_mean_sq);
        w.f64s(self.mds.eigenvalues.iter());
        w.f64s(self.mds.eigenvectors.iter());
    }

    pub(crate) fn decode(
        r: &mut ByteReader<'_>,
        exec: Execution,
        memory_limit: u64,
    ) -> Result<Self> {
        let n = r.usize()?;
        let d = r.usize()?;
        let k = r.usize()?;
        let entry_k = r.usize()?;
        let m = r.usize()?;
        if n < 2 || d == 0 || m == 0 || m >= n || k == 0 || k >= n || entry_k == 0 || entry_k > n {
            return Err(Error::Corrupted(format!(
                "Isomap header n={n} d={d} k={k} entry_k={entry_k} m={m}"
            )));
        }
        let train_vectors = r.array2(n, d)?;
        let read_edges = |r: &mut ByteReader<'_>| -> Result<Vec<(usize, usize, f64)>> {
            let count = r.usize()?;
            let mut edges = Vec::with_capacity(count.min(1 << 20));
            for _ in 0..count {
                edges.push((r.usize()?, r.usize()?, r.f64()?));
            }
            Ok(edges)
        };
        let edges = read_edges(r)?;
        let bridged = read_edges(r)?;
        let mut graph =
            NeighborGraph::from_edges(n, k, &edges).map_err(|e| Error::Corrupted(e.to_string()))?;
        graph.set_bridged_edges(bridged);
        let row_mean_sq = r.array1(n)?;
        let grand_mean_sq = r.f64()?;
        let eigenvalues = r.f64_vec(m)?;
        let eigenvectors = r.array2(n, m)?;
        if eigenvalues.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(Error::Corrupted("non-positive Isomap eigenvalue".into()));
        }
        let geodesics = geodesic::all_pairs_geodesic_with(&graph, exec, memory_limit)?;
        Ok(Self {
            train_vectors,
            graph,
            geodesics,
            mds: MdsEmbedding {
                row_mean_sq,
                grand_mean_sq,
                eigenvalues,
                eigenvectors,
            },
            entry_k,
        })
    }
}

pub fn isomap_fit(train: &EmbeddingDataset, m: usize, k: usize) -> Result<IsomapModel> {
    IsomapModel::fit(train, m, k)
}

pub fn isomap_transform(model: &IsomapModel, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
    model.transform(ds)
}
