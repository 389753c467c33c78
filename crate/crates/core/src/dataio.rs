//! Embedding datasets and their two on-disk formats.
//!
//! CSV: header `id,f0,f1,...,f{d-1}[,label]`, one record per line, floats
//! written with 9 significant digits. Empty ids are read back as "no ids".
//!
//! Binary (little-endian, no padding):
//!
//! | field    | type          |
//! |----------|---------------|
//! | magic    | `b"GEOC"`     |
//! | version  | u32 (= 1)     |
//! | n        | u64           |
//! | d        | u64           |
//! | flags    | u32, bit 0 = labels present |
//! | vectors  | n·d f32, row-major |
//! | labels   | n bytes (0/1), only if flagged |
//!
//! Vectors are held as f64 in memory. The binary format stores f32, so it
//! round-trips exactly for f32-representable values. Ids are not part of the
//! binary format.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"GEOC";
pub const BINARY_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 4;
const FLAG_LABELS: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Binary,
}

impl Format {
    /// `.csv` selects CSV, anything else the binary format.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

/// `n` embedding vectors (rows) with optional binary labels and ids.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDataset {
    vectors: Array2<f64>,
    labels: Option<Vec<u8>>,
    ids: Option<Vec<String>>,
}

impl EmbeddingDataset {
    pub fn new(
        vectors: Array2<f64>,
        labels: Option<Vec<u8>>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = vectors.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!(
                "dataset must have at least one row and one column (got {n}x{d})"
            )));
        }
        for (i, row) in vectors.outer_iter().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::parse(
                    Some(i),
                    format!("non-finite value in column {j}"),
                ));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::invalid(format!("{} labels for {n} rows", l.len())));
            }
            if let Some(i) = l.iter().position(|&v| v > 1) {
                return Err(Error::parse(
                    Some(i),
                    format!("label {} is not 0 or 1", l[i]),
                ));
            }
        }
        if let Some(ids) = &ids {
            if ids.len() != n {
                return Err(Error::invalid(format!("{} ids for {n} rows", ids.len())));
            }
        }
        Ok(Self {
            vectors,
            labels,
            ids,
        })
    }

    pub fn unlabeled(vectors: Array2<f64>) -> Result<Self> {
        Self::new(vectors, None, None)
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn d(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels().ok_or(Error::MissingLabels)
    }

    pub fn into_parts(self) -> (Array2<f64>, Option<Vec<u8>>, Option<Vec<String>>) {
        (self.vectors, self.labels, self.ids)
    }

    /// Same labels and ids, new vectors (row count must match).
    pub fn with_vectors(&self, vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: vectors.nrows(),
            });
        }
        Self::new(vectors, self.labels.clone(), self.ids.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::invalid(format!("row {bad} out of range")));
        }
        let vectors = self.vectors.select(Axis(0), rows);
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        let ids = self
            .ids
            .as_ref()
            .map(|ids| rows.iter().map(|&r| ids[r].clone()).collect());
        Self::new(vectors, labels, ids)
    }

    /// SHA-256 over `n`, `d` and the f64 bit patterns of all entries.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.d() as u64).to_le_bytes());
        for v in self.vectors.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}

/// Train/evaluation pair sharing one input dimension.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: EmbeddingDataset,
    pub eval: EmbeddingDataset,
}

impl DatasetSplit {
    pub fn new(train: EmbeddingDataset, eval: EmbeddingDataset) -> Result<Self> {
        if train.d() != eval.d() {
            return Err(Error::DimensionMismatch {
                expected: train.d(),
                got: eval.d(),
            });
        }
        Ok(Self { train, eval })
    }

    pub fn require_labels(&self) -> Result<()> {
        self.train.require_labels()?;
        self.eval.require_labels()?;
        Ok(())
    }
}

pub fn read_dataset(path: impl AsRef<Path>, format: Format) -> Result<EmbeddingDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Csv => parse_csv(&bytes),
        Format::Binary => decode_binary(&bytes),
    }
}

pub fn write_dataset(ds: &EmbeddingDataset, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        Format::Csv => encode_csv(ds)?,
        Format::Binary => encode_binary(ds),
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn format_float(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn encode_csv(ds: &EmbeddingDataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = Vec::with_capacity(ds.d() + 2);
    header.push("id".to_string());
    header.extend((0..ds.d()).map(|j| format!("f{j}")));
    if ds.labels.is_some() {
        header.push("label".to_string());
    }
    let csv_err = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..ds.n() {
        record.clear();
        record.push(ds.ids.as_ref().map_or(String::new(), |ids| ids[i].clone()));
        record.extend(ds.vectors.row(i).iter().map(|&v| format_float(v)));
        if let Some(l) = &ds.labels {
            record.push(l[i].to_string());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv encoding failed: {e}")))
}

pub fn parse_csv(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(None, format!("unreadable header: {e}")))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.first() != Some(&"id") {
        return Err(Error::parse(None, "header must start with 'id'"));
    }
    let has_labels = cols.last() == Some(&"label");
    let d = cols.len() - 1 - usize::from(has_labels);
    if d == 0 {
        return Err(Error::parse(None, "header declares no feature columns"));
    }
    for (j, name) in cols[1..=d].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(Error::parse(
                None,
                format!("header column {} is '{name}', expected 'f{j}'", j + 1),
            ));
        }
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(Some(row), e.to_string()))?;
        if rec.len() != cols.len() {
            return Err(Error::parse(
                Some(row),
                format!("expected {} fields, found {}", cols.len(), rec.len()),
            ));
        }
        ids.push(rec[0].to_string());
        for j in 0..d {
            let field = rec[j + 1].trim();
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(Some(row), format!("bad number '{field}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(
                    Some(row),
                    format!("non-finite value '{field}'"),
                ));
            }
            values.push(v);
        }
        if has_labels {
            let field = rec[d + 1].trim();
            labels.push(match field {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::parse(
                        Some(row),
                        format!("unknown label value '{field}'"),
                    ))
                }
            });
        }
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::parse(None, "no data rows"));
    }
    let vectors = Array2::from_shape_vec((n, d), values).expect("row widths checked");
    let ids = if ids.iter().all(String::is_empty) {
        None
    } else {
        Some(ids)
    };
    EmbeddingDataset::new(vectors, has_labels.then_some(labels), ids)
}

pub fn encode_binary(ds: &EmbeddingDataset) -> Vec<u8> {
    let (n, d) = (ds.n(), ds.d());
    let label_len = if ds.labels.is_some() { n } else { 0 };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d + label_len);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    let flags = if ds.labels.is_some() { FLAG_LABELS } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for &v in ds.vectors.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if let Some(l) = &ds.labels {
        out.extend_from_slice(l);
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<EmbeddingDataset> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(None, "file shorter than header"));
    }
    if &bytes[0..4] != BINARY_MAGIC {
        return Err(Error::Version("bad magic (expected GEOC)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != BINARY_VERSION {
        return Err(Error::Version(format!(
            "dataset format version {version} (expected {BINARY_VERSION})"
        )));
    }
    let n = u64_at(8);
    let d = u64_at(16);
    let flags = u32_at(24);
    if flags & !FLAG_LABELS != 0 {
        return Err(Error::parse(None, format!("unknown flags {flags:#x}")));
    }
    let has_labels = flags & FLAG_LABELS != 0;
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(4))
        .and_then(|b| b.checked_add(if has_labels { n } else { 0 }))
        .and_then(|b| b.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::parse(
            None,
            format!(
                "declared n={n}, d={d} disagrees with payload length {}",
                bytes.len() - HEADER_LEN
            ),
        ));
    }
    let (n, d) = (n as usize, d as usize);
    let body = &bytes[HEADER_LEN..HEADER_LEN + 4 * n * d];
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let vectors =
        Array2::from_shape_vec((n, d), values).map_err(|e| Error::parse(None, e.to_string()))?;
    let labels = has_labels.then(|| bytes[HEADER_LEN + 4 * n * d..].to_vec());
    EmbeddingDataset::new(vectors, labels, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_ds(n: usize, d: usize, labels: bool, seed: u64) -> EmbeddingDataset {
        let mut r = SplitMix64::new(seed);
        let v = Array2::from_shape_fn((n, d), |_| r.normal() as f32 as f64);
        let l = labels.then(|| (0..n).map(|i| (i % 2) as u8).collect());
        let ids = Some((0..n).map(|i| format!("s{i}")).collect());
        EmbeddingDataset::new(v, l, ids).unwrap()
    }

    #[test]
    fn csv_three_rows_with_labels() {
        let text = "id,f0,f1,f2,f3,label\na,1,2,3,4,0\nb,0.5,-1,2e-3,7,1\nc,0,0,0,0,1\n";
        let ds = parse_csv(text.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 4));
        assert_eq!(ds.labels(), Some(&[0u8, 1, 1][..]));
        assert_eq!(ds.vectors()[[1, 2]], 2e-3);
        assert_eq!(ds.ids().unwrap()[2], "c");
    }

    #[test]
    fn csv_nan_names_row() {
        let text = "id,f0,f1\na,1,2\nb,nan,3\n";
        match parse_csv(text.as_bytes()) {
            Err(Error::Parse { row: Some(1), .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_errors() {
        let ragged = "id,f0,f1\na,1,2\nb,3\n";
        assert!(matches!(
            parse_csv(ragged.as_bytes()),
            Err(Error::Parse { row: Some(1), .. })
        ));
        let bad_label = "id,f0,label\na,1,2\n";
        assert!(matches!(
            parse_csv(bad_label.as_bytes()),
            Err(Error::Parse { row: Some(0), .. })
        ));
        let bad_header = "id,f1,f0\na,1,2\n";
        assert!(matches!(
            parse_csv(bad_header.as_bytes()),
            Err(Error::Parse { row: None, .. })
        ));
    }

    #[test]
    fn binary_768() {
        let ds = random_ds(2, 768, false, 1);
        let bytes = encode_binary(&ds);
        assert_eq!(bytes.len(), HEADER_LEN + 1536 * 4);
        let back = decode_binary(&bytes).unwrap();
        assert_eq!((back.n(), back.d()), (2, 768));
        assert_eq!(back.vectors(), ds.vectors());
    }

    #[test]
    fn binary_rejects_length_disagreement() {
        let ds = random_ds(3, 4, true, 2);
        let bytes = encode_binary(&ds);
        assert!(decode_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(decode_binary(&longer).is_err());
        let mut wrong_n = bytes.clone();
        wrong_n[8] = 4;
        assert!(decode_binary(&wrong_n).is_err());
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(decode_binary(&magic).is_err());
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = random_ds(5, 16, true, 3);
        let bin = dir.path().join("a.bin");
        write_dataset(&ds, &bin, Format::Binary).unwrap();
        let back = read_dataset(&bin, Format::Binary).unwrap();
        assert_eq!(back.vectors(), ds.vectors());
        assert_eq!(back.labels(), ds.labels());

        let csv = dir.path().join("a.csv");
        write_dataset(&ds, &csv, Format::Csv).unwrap();
        let back = read_dataset(&csv, Format::Csv).unwrap();
        let err = (back.vectors() - ds.vectors())
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-6);
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.ids(), ds.ids());
    }

    #[test]
    fn unlabeled_csv_has_no_label_column() {
        let ds = random_ds(4, 3, false, 4);
        let text = String::from_utf8(encode_csv(&ds).unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "id,f0,f1,f2");
        assert!(parse_csv(text.as_bytes()).unwrap().labels().is_none());
    }

    #[test]
    fn invariants_enforced() {
        assert!(EmbeddingDataset::unlabeled(Array2::zeros((0, 3))).is_err());
        let v = Array2::zeros((2, 2));
        assert!(EmbeddingDataset::new(v.clone(), Some(vec![0]), None).is_err());
        assert!(EmbeddingDataset::new(v, Some(vec![0, 2]), None).is_err());
    }
}
