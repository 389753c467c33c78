//! Reducer composition: PCA only, Isomap only, or both concatenated
//! (`[isomap ‖ pca]`, Isomap block first), with a binary container for the
//! fitted state.
//!
//! Container layout (little-endian):
//!
//! ```text
//! b"GEOR"  u32 version
//! spec:         u8 kind, u64 total_dim, u64 isomap_dim, u64 pca_dim,
//!               u64 k_neighbors, u64 entry_k (0 = same as k), u8 zscore
//! fingerprint:  u64 n, u64 d, [u8; 32] SHA-256 of the training matrix
//! u8 has_pca     [u64 len, PCA payload]
//! u8 has_isomap  [u64 len, Isomap payload]
//! u8 has_scaler  [u64 len, scaler payload]
//! ```
//!
//! All model parameters are stored as f64. The Isomap payload holds the
//! training vectors and the neighbor graph, so its size grows with `n·d`.

use std::fs;
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};

use crate::codec::{ByteReader, ByteWriter};
use crate::dataio::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::geodesic::DEFAULT_MEMORY_LIMIT;
use crate::isomap::{IsomapModel, IsomapOptions};
use crate::linalg::EigenOptions;
use crate::neighbors::DEFAULT_K;
use crate::par::Execution;
use crate::pca::PcaModel;

pub const REDUCER_MAGIC: &[u8; 4] = b"GEOR";
pub const REDUCER_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReducerKind {
    Pca,
    Isomap,
    Concat,
}

impl ReducerKind {
    pub fn name(self) -> &'static str {
        match self {
            ReducerKind::Pca => "pca",
            ReducerKind::Isomap => "isomap",
            ReducerKind::Concat => "concat",
        }
    }

    fn code(self) -> u8 {
        match self {
            ReducerKind::Pca => 0,
            ReducerKind::Isomap => 1,
            ReducerKind::Concat => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(ReducerKind::Pca),
            1 => Ok(ReducerKind::Isomap),
            2 => Ok(ReducerKind::Concat),
            _ => Err(Error::Corrupted(format!("unknown reducer kind {c}"))),
        }
    }
}

impl std::fmt::Display for ReducerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ReducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(ReducerKind::Pca),
            "isomap" => Ok(ReducerKind::Isomap),
            "concat" => Ok(ReducerKind::Concat),
            other => Err(Error::invalid(format!(
                "unknown reducer kind '{other}' (expected pca, isomap or concat)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReducerSpec {
    pub kind: ReducerKind,
    pub total_dim: usize,
    /// Only meaningful for `Concat`.
    pub isomap_dim: usize,
    /// Only meaningful for `Concat`.
    pub pca_dim: usize,
    pub k_neighbors: usize,
    /// Out-of-sample entry neighbors; `None` means `k_neighbors`.
    pub entry_k: Option<usize>,
    /// Per-column z-scoring of the output using training statistics.
    pub zscore: bool,
}

impl ReducerSpec {
    pub fn pca(dim: usize) -> Self {
        Self {
            kind: ReducerKind::Pca,
            total_dim: dim,
            isomap_dim: 0,
            pca_dim: 0,
            k_neighbors: DEFAULT_K,
            entry_k: None,
            zscore: false,
        }
    }

    pub fn isomap(dim: usize, k: usize) -> Self {
        Self {
            kind: ReducerKind::Isomap,
            k_neighbors: k,
            ..Self::pca(dim)
        }
    }

    pub fn concat(isomap_dim: usize, pca_dim: usize, k: usize) -> Self {
        Self {
            kind: ReducerKind::Concat,
            total_dim: isomap_dim + pca_dim,
            isomap_dim,
            pca_dim,
            k_neighbors: k,
            entry_k: None,
            zscore: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_dim == 0 {
            return Err(Error::invalid("total dimension must be >= 1"));
        }
        if self.k_neighbors == 0 {
            return Err(Error::invalid("neighbor count must be >= 1"));
        }
        if self.entry_k == Some(0) {
            return Err(Error::invalid("entry neighbor count must be >= 1"));
        }
        if self.kind == ReducerKind::Concat && self.isomap_dim + self.pca_dim != self.total_dim {
            return Err(Error::invalid(format!(
                "isomap_dim ({}) + pca_dim ({}) must equal total_dim ({})",
                self.isomap_dim, self.pca_dim, self.total_dim
            )));
        }
        Ok(())
    }

    /// `(isomap_dim, pca_dim)` after resolving the pure kinds.
    pub fn block_dims(&self) -> (usize, usize) {
        match self.kind {
            ReducerKind::Pca => (0, self.total_dim),
            ReducerKind::Isomap => (self.total_dim, 0),
            ReducerKind::Concat => (self.isomap_dim, self.pca_dim),
        }
    }

    fn encode(&self, w: &mut ByteWriter) {
        w.u8(self.kind.code());
        w.usize(self.total_dim);
        w.usize(self.isomap_dim);
        w.usize(self.pca_dim);
        w.usize(self.k_neighbors);
        w.usize(self.entry_k.unwrap_or(0));
        w.u8(u8::from(self.zscore));
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let spec = Self {
            kind: ReducerKind::from_code(r.u8()?)?,
            total_dim: r.usize()?,
            isomap_dim: r.usize()?,
            pca_dim: r.usize()?,
            k_neighbors: r.usize()?,
            entry_k: Some(r.usize()?).filter(|&e| e != 0),
            zscore: match r.u8()? {
                0 => false,
                1 => true,
                other => return Err(Error::Corrupted(format!("bad zscore flag {other}"))),
            },
        };
        spec.validate()
            .map_err(|e| Error::Corrupted(format!("invalid spec: {e}")))?;
        Ok(spec)
    }
}

/// Concatenation splits `(isomap_dim, pca_dim)` at Isomap fractions
/// 0, 1/4, 1/2, 3/4 and 1 of `total`.
pub fn quarter_splits(total: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..=4)
        .map(|q| {
            let iso = (total * q + 2) / 4;
            (iso, total - iso)
        })
        .collect();
    out.dedup();
    out
}

/// Splits with PCA-to-Isomap size ratio 0, 1/8, ..., 1/2; the Isomap size
/// is `total / (1 + ratio)` rounded to the nearest integer.
pub fn eighth_ratio_splits(total: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..=4)
        .map(|e| {
            let ratio = e as f64 / 8.0;
            let iso = (total as f64 / (1.0 + ratio)).round() as usize;
            (iso, total - iso)
        })
        .collect();
    out.dedup();
    out
}

/// Identifies the training matrix a reducer was fitted on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    pub n: usize,
    pub d: usize,
    pub hash: [u8; 32],
}

impl Fingerprint {
    pub fn of(ds: &EmbeddingDataset) -> Self {
        Self {
            n: ds.n(),
            d: ds.d(),
            hash: ds.content_hash(),
        }
    }

    pub fn hex(&self) -> String {
        self.hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-column affine map `(x - mean) / std`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnScaler {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl ColumnScaler {
    fn fit(y: &Array2<f64>) -> Self {
        let n = y.nrows();
        let mean = y.mean_axis(Axis(0)).expect("nonempty");
        let std = if n > 1 {
            y.var_axis(Axis(0), 1.0).mapv(f64::sqrt)
        } else {
            Array1::ones(y.ncols())
        };
        let std = std.mapv(|s| if s > 0.0 { s } else { 1.0 });
        Self { mean, std }
    }

    fn apply(&self, y: Array2<f64>) -> Array2<f64> {
        (y - &self.mean) / &self.std
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub exec: Execution,
    pub memory_limit: u64,
    pub eigen: EigenOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            exec: Execution::default(),
            memory_limit: DEFAULT_MEMORY_LIMIT,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedReducer {
    spec: ReducerSpec,
    fingerprint: Fingerprint,
    pca: Option<PcaModel>,
    isomap: Option<IsomapModel>,
    scaler: Option<ColumnScaler>,
}

impl FittedReducer {
    pub fn fit(spec: &ReducerSpec, train: &EmbeddingDataset) -> Result<Self> {
        Self::fit_with(spec, train, &FitOptions::default())
    }

    pub fn fit_with(
        spec: &ReducerSpec,
        train: &EmbeddingDataset,
        opts: &FitOptions,
    ) -> Result<Self> {
        spec.validate()?;
        let (iso_dim, pca_dim) = spec.block_dims();
        let iso_opts = IsomapOptions {
            k: spec.k_neighbors,
            entry_k: spec.entry_k,
            exec: opts.exec,
            memory_limit: opts.memory_limit,
            eigen: opts.eigen,
        };
        let (isomap, pca) = opts.exec.join(
            || {
                (iso_dim > 0)
                    .then(|| IsomapModel::fit_with(train, iso_dim, &iso_opts))
                    .transpose()
            },
            || {
                (pca_dim > 0)
                    .then(|| PcaModel::fit(train, pca_dim))
                    .transpose()
            },
        );
        let mut reducer = Self {
            spec: spec.clone(),
            fingerprint: Fingerprint::of(train),
            pca: pca?,
            isomap: isomap?,
            scaler: None,
        };
        if spec.zscore {
            let y = reducer.raw_project(train.vectors(), opts.exec)?;
            reducer.scaler = Some(ColumnScaler::fit(&y));
        }
        Ok(reducer)
    }

    pub fn spec(&self) -> &ReducerSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn isomap(&self) -> Option<&IsomapModel> {
        self.isomap.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.fingerprint.d
    }

    pub fn output_dim(&self) -> usize {
        self.spec.total_dim
    }

    fn raw_project(&self, x: &Array2<f64>, exec: Execution) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut blocks = Vec::with_capacity(2);
        if let Some(iso) = &self.isomap {
            blocks.push(iso.project(x, exec)?);
        }
        if let Some(pca) = &self.pca {
            blocks.push(pca.project(x)?);
        }
        match blocks.len() {
            1 => Ok(blocks.pop().expect("one block")),
            _ => {
                let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
                Ok(concatenate(Axis(1), &views).expect("equal row counts"))
            }
        }
    }

    pub fn project(&self, x: &Array2<f64>, exec: Execution) -> Result<Array2<f64>> {
        let y = self.raw_project(x, exec)?;
        Ok(match &self.scaler {
            Some(s) => s.apply(y),
            None => y,
        })
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

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(REDUCER_MAGIC);
        w.u32(REDUCER_VERSION);
        self.spec.encode(&mut w);
        w.usize(self.fingerprint.n);
        w.usize(self.fingerprint.d);
        w.bytes(&self.fingerprint.hash);

        w.u8(u8::from(self.pca.is_some()));
        if let Some(p) = &self.pca {
            let mut sub = ByteWriter::default();
            p.encode(&mut sub);
            w.section(&sub.buf);
        }
        w.u8(u8::from(self.isomap.is_some()));
        if let Some(iso) = &self.isomap {
            let mut sub = ByteWriter::default();
            iso.encode(&mut sub);
            w.section(&sub.buf);
        }
        w.u8(u8::from(self.scaler.is_some()));
        if let Some(s) = &self.scaler {
            let mut sub = ByteWriter::default();
            sub.usize(s.mean.len());
            sub.f64s(s.mean.iter());
            sub.f64s(s.std.iter());
            w.section(&sub.buf);
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes_with(bytes, &FitOptions::default())
    }

    pub fn from_bytes_with(bytes: &[u8], opts: &FitOptions) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != REDUCER_MAGIC {
            return Err(Error::Version("bad magic (expected GEOR)".into()));
        }
        let mut r = ByteReader::new(bytes);
        r.take(4)?;
        let version = r.u32()?;
        if version != REDUCER_VERSION {
            return Err(Error::Version(format!(
                "reducer format version {version} (expected {REDUCER_VERSION})"
            )));
        }
        let spec = ReducerSpec::decode(&mut r)?;
        let n = r.usize()?;
        let d = r.usize()?;
        let hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let fingerprint = Fingerprint { n, d, hash };

        let pca = match r.u8()? {
            0 => None,
            1 => {
                let mut sub = r.section()?;
                let p = PcaModel::decode(&mut sub)?;
                sub.finish()?;
                Some(p)
            }
            f => return Err(Error::Corrupted(format!("bad presence flag {f}"))),
        };
        let isomap = match r.u8()? {
            0 => None,
            1 => {
                let mut sub = r.section()?;
                let m = IsomapModel::decode(&mut sub, opts.exec, opts.memory_limit)?;
                sub.finish()?;
                Some(m)
            }
            f => return Err(Error::Corrupted(format!("bad presence flag {f}"))),
        };
        let scaler = match r.u8()? {
            0 => None,
            1 => {
                let mut sub = r.section()?;
                let m = sub.usize()?;
                let s = ColumnScaler {
                    mean: sub.array1(m)?,
                    std: sub.array1(m)?,
                };
                sub.finish()?;
                Some(s)
            }
            f => return Err(Error::Corrupted(format!("bad presence flag {f}"))),
        };
        r.finish()?;

        let (iso_dim, pca_dim) = spec.block_dims();
        let ok = pca.as_ref().map_or(0, |p| p.output_dim()) == pca_dim
            && isomap.as_ref().map_or(0, |m| m.output_dim()) == iso_dim
            && pca.as_ref().is_none_or(|p| p.input_dim() == d)
            && isomap
                .as_ref()
                .is_none_or(|m| m.input_dim() == d && m.n_train() == n)
            && scaler.as_ref().map_or(!spec.zscore, |s| {
                spec.zscore && s.mean.len() == spec.total_dim
            });
        if !ok {
            return Err(Error::Corrupted(
                "sub-models do not match the reducer spec".into(),
            ));
        }
        Ok(Self {
            spec,
            fingerprint,
            pca,
            isomap,
            scaler,
        })
    }
}

pub fn fit(spec: &ReducerSpec, train: &EmbeddingDataset) -> Result<FittedReducer> {
    FittedReducer::fit(spec, train)
}

pub fn transform(r: &FittedReducer, ds: &EmbeddingDataset) -> Result<EmbeddingDataset> {
    r.transform(ds)
}

pub fn save_reducer(r: &FittedReducer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, r.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_reducer(path: impl AsRef<Path>) -> Result<FittedReducer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FittedReducer::from_bytes(&bytes)
}
