//! Thin wrappers around nalgebra decompositions for ndarray-backed tensors.
//!
//! All matrices here are small (bond or dense-oracle sized), so the copies
//! between row-major ndarray storage and column-major nalgebra storage do not
//! matter.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;

use crate::C64;

fn to_na(a: &Array2<C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
}

fn to_na_real(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[[r, c]])
}

fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(r, c)| m[(r, c)])
}

/// Thin singular value decomposition `a = u · diag(s) · vt`.
///
/// `u` is `(m, k)`, `vt` is `(k, n)` with `k = min(m, n)`; singular values are
/// returned in descending order.
pub fn svd(a: &Array2<C64>) -> (Array2<C64>, Vec<f64>, Array2<C64>) {
    let svd = to_na(a).svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();

    // nalgebra does not guarantee ordering; sort descending.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).expect("finite singular values"));

    let k = s.len();
    let mut u_sorted = Array2::zeros((a.nrows(), k));
    let mut vt_sorted = Array2::zeros((k, a.ncols()));
    let mut s_sorted = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        s_sorted.push(s[src]);
        for r in 0..a.nrows() {
            u_sorted[[r, dst]] = u[(r, src)];
        }
        for c in 0..a.ncols() {
            vt_sorted[[dst, c]] = vt[(src, c)];
        }
    }
    (u_sorted, s_sorted, vt_sorted)
}

/// Thin QR decomposition `a = q · r` with `q` of shape `(m, min(m, n))`.
pub fn qr_thin(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let qr = to_na(a).qr();
    let q = qr.q();
    let r = qr.r();
    (from_na(&q), from_na(&r))
}

/// Hermitian eigendecomposition with eigenvalues in ascending order.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
pub fn eigh(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let eig = to_na(a).symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite eigenvalues"));

    let n = vals.len();
    let mut vecs = Array2::zeros((n, n));
    let mut sorted = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.push(vals[src]);
        for r in 0..n {
            vecs[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    (sorted, vecs)
}

/// Eigendecomposition of a real symmetric tridiagonal matrix given by its
/// diagonal and off-diagonal; used by the Lanczos solver.
pub fn eigh_tridiagonal(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Array2<f64>) {
    let m = diag.len();
    let mut t = Array2::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = diag[i];
        if i + 1 < m {
            t[[i, i + 1]] = offdiag[i];
            t[[i + 1, i]] = offdiag[i];
        }
    }
    let eig = to_na_real(&t).symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite eigenvalues"));

    let mut vecs = Array2::zeros((m, m));
    let mut sorted = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        sorted.push(vals[src]);
        for r in 0..m {
            vecs[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    (sorted, vecs)
}

/// Solve the small linear system `a · x = b` (used by the L-BFGS line search
/// only through polynomial interpolation helpers; kept here for locality).
#[allow(dead_code)]
pub fn solve(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = to_na_real(a).lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.iter().copied().collect())
}
