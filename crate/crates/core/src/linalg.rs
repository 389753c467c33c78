//! Dense symmetric eigendecomposition and small matrix helpers.
//!
//! Two solvers sit behind [`top_k_symmetric_eigen`]:
//!
//! * a full decomposition (Householder tridiagonalization followed by the
//!   implicit QL iteration) used for matrices up to
//!   [`EigenOptions::dense_limit`] rows;
//! * a restarted block Krylov method with Rayleigh–Ritz extraction for the
//!   top `k` pairs of larger matrices.
//!
//! Both return eigenvalues in descending order with the sign of each
//! eigenvector fixed so that its largest-magnitude entry (lowest index on
//! ties) is positive.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Residual tolerance, relative to `max(1, ‖A‖∞)`.
pub const EIGEN_TOL: f64 = 1e-8;
/// Allowed asymmetry, relative to `max(1, ‖A‖∞)`.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricEigen {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// One column per eigenvalue.
    pub eigenvectors: Array2<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense for `n <= dense_limit`, Krylov otherwise.
    Auto,
    Dense,
    Krylov,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub method: EigenMethod,
    pub dense_limit: usize,
    /// Seed of the Krylov start block.
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            dense_limit: 2000,
            seed: 0x5EED,
        }
    }
}

pub fn inf_norm(a: &Array2<f64>) -> f64 {
    a.outer_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Subtracts the column means; returns the centered matrix and the means.
pub fn center_columns(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    if m.nrows() == 0 {
        return Err(Error::invalid("cannot center a matrix with no rows"));
    }
    let mean = m.mean_axis(Axis(0)).expect("nonempty");
    let centered = m - &mean;
    Ok((centered, mean))
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn fix_signs(vectors: &mut Array2<f64>) {
    for mut col in vectors.columns_mut() {
        let mut best = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }
}

pub fn top_k_symmetric_eigen(a: &Array2<f64>, k: usize) -> Result<SymmetricEigen> {
    top_k_symmetric_eigen_with(a, k, &EigenOptions::default())
}

pub fn top_k_symmetric_eigen_with(
    a: &Array2<f64>,
    k: usize,
    opts: &EigenOptions,
) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid(format!(
            "matrix must be square (got {}x{})",
            n,
            a.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let norm = inf_norm(a);
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOL * norm.max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Krylov => false,
        EigenMethod::Auto => n <= opts.dense_limit,
    };
    let mut out = if dense {
        dense_top_k(a, k)?
    } else {
        krylov_top_k(a, k, norm, opts.seed)?
    };
    fix_signs(&mut out.eigenvectors);
    Ok(out)
}

fn dense_top_k(a: &Array2<f64>, k: usize) -> Result<SymmetricEigen> {
    let (values, vectors_t) = symmetric_eigen_full(a)?;
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep their QL order.
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut eigenvectors = Array2::zeros((n, k));
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        eigenvalues.push(values[idx]);
        eigenvectors.column_mut(c).assign(&vectors_t.row(idx));
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Full decomposition. Returns unsorted eigenvalues and the eigenvectors as
/// the rows of the second matrix.
///
/// The eigenvector matrix is kept transposed throughout so that the inner
/// loops of both phases walk contiguous memory.
fn symmetric_eigen_full(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = a.nrows();
    // Lower triangle of the symmetrized input; w[j][k] holds V[k][j].
    let mut w = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]]));
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    if n == 1 {
        return Ok((vec![w[[0, 0]]], Array2::ones((1, 1))));
    }
    tridiagonalize(&mut w, &mut d, &mut e);
    tridiagonal_ql(&mut w, &mut d, &mut e)?;
    Ok((d, w))
}

fn tridiagonalize(w: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = w[[j, n - 1]];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[[j, i - 1]];
                w[[j, i]] = 0.0;
                w[[i, j]] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                w[[i, j]] = f;
                g = e[j] + w[[j, j]] * f;
                let row = w.row(j);
                let row = row.as_slice().expect("standard layout");
                for kk in j + 1..i {
                    g += row[kk] * d[kk];
                    e[kk] += row[kk] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let mut row = w.row_mut(j);
                let row = row.as_slice_mut().expect("standard layout");
                for kk in j..i {
                    row[kk] -= f * e[kk] + g * d[kk];
                }
                d[j] = row[i - 1];
                row[i] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..n - 1 {
        w[[i, n - 1]] = w[[i, i]];
        w[[i, i]] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for kk in 0..=i {
                d[kk] = w[[i + 1, kk]] / h;
            }
            let pivot = w.row(i + 1).to_owned();
            let pivot = pivot.as_slice().expect("owned");
            for j in 0..=i {
                let mut row = w.row_mut(j);
                let row = row.as_slice_mut().expect("standard layout");
                let mut g = 0.0;
                for kk in 0..=i {
                    g += pivot[kk] * row[kk];
                }
                for kk in 0..=i {
                    row[kk] -= g * d[kk];
                }
            }
        }
        for kk in 0..=i {
            w[[i + 1, kk]] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[[j, n - 1]];
        w[[j, n - 1]] = 0.0;
    }
    w[[n - 1, n - 1]] = 1.0;
    e[0] = 0.0;
}

fn tridiagonal_ql(w: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_ITER_PER_VALUE: usize = 60;
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    let mut total_iter = 0usize;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                total_iter += 1;
                if iter > MAX_ITER_PER_VALUE {
                    return Err(Error::NoConvergence {
                        iterations: total_iter,
                        residual: e[l].abs(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (mut lo, mut hi) = w.multi_slice_mut((s![i, ..], s![i + 1, ..]));
                    for (vi, vi1) in lo.iter_mut().zip(hi.iter_mut()) {
                        let t = *vi1;
                        *vi1 = s * *vi + c * t;
                        *vi = c * *vi - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

/// Orthonormalizes `candidates` against `basis` and each other (two passes
/// of classical Gram–Schmidt) and appends the survivors to `basis`.
/// Returns how many were appended.
fn extend_orthonormal(basis: &mut Vec<Array1<f64>>, candidates: Vec<Array1<f64>>) -> usize {
    let mut added = 0;
    for mut v in candidates {
        let start = v.dot(&v).sqrt();
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in basis.iter() {
                let c = dot(q.view(), v.view());
                v.scaled_add(-c, q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-10 * start {
            v /= norm;
            basis.push(v);
            added += 1;
        }
    }
    added
}

fn columns_of(m: &Array2<f64>) -> Vec<Array1<f64>> {
    m.columns().into_iter().map(|c| c.to_owned()).collect()
}

fn stack_columns(cols: &[Array1<f64>], n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

const KRYLOV_DEPTH: usize = 4;
const KRYLOV_OVERSAMPLE: usize = 8;

fn krylov_top_k(a: &Array2<f64>, k: usize, norm: f64, seed: u64) -> Result<SymmetricEigen> {
    let n = a.nrows();
    let block = (k + KRYLOV_OVERSAMPLE).min(n);
    let budget = (10 * k).max(10);
    let tol = EIGEN_TOL * norm.max(1.0);
    let mut rng = SplitMix64::new(seed);
    let mut start: Vec<Array1<f64>> = Vec::new();
    let mut worst = f64::INFINITY;

    for _restart in 0..budget {
        // Top up the start block with random directions if it lost rank.
        let mut basis: Vec<Array1<f64>> = Vec::new();
        extend_orthonormal(&mut basis, std::mem::take(&mut start));
        while basis.len() < block {
            let fresh = (0..block - basis.len())
                .map(|_| Array1::from_shape_fn(n, |_| rng.normal()))
                .collect();
            extend_orthonormal(&mut basis, fresh);
        }

        let mut images: Vec<Array1<f64>> = Vec::new();
        let mut frontier = 0;
        for _ in 0..KRYLOV_DEPTH {
            let cur = stack_columns(&basis[frontier..], n);
            let img = a.dot(&cur);
            images.extend(columns_of(&img));
            frontier = basis.len();
            if basis.len() >= n {
                break;
            }
            let added = extend_orthonormal(&mut basis, columns_of(&img));
            if added == 0 {
                break;
            }
        }
        if images.len() < basis.len() {
            let cur = stack_columns(&basis[images.len()..], n);
            images.extend(columns_of(&a.dot(&cur)));
        }

        let v = stack_columns(&basis, n);
        let av = stack_columns(&images, n);
        let mut t = v.t().dot(&av);
        let tt = t.t().to_owned();
        t = (&t + &tt) * 0.5;
        let ritz = dense_top_k(&t, t.nrows())?;
        let keep = block.min(ritz.eigenvalues.len());
        let y = ritz.eigenvectors.slice(s![.., ..keep]).to_owned();
        let x = v.dot(&y);
        let ax = av.dot(&y);

        worst = 0.0;
        for j in 0..k {
            let theta = ritz.eigenvalues[j];
            let r = (&ax.column(j) - &(&x.column(j) * theta))
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(r);
        }
        if worst <= tol {
            return Ok(SymmetricEigen {
                eigenvalues: ritz.eigenvalues[..k].to_vec(),
                eigenvectors: x.slice(s![.., ..k]).to_owned(),
            });
        }
        start = columns_of(&x);
    }
    Err(Error::NoConvergence {
        iterations: budget,
        residual: worst,
    })
}
