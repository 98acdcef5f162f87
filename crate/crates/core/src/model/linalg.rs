//! Thin helpers over `faer` for the symmetric dense work the model needs.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};

use crate::{Error, Result};

/// Inverse of a symmetric positive definite matrix via Cholesky. The result is
/// symmetrised so downstream symmetry checks are exact.
pub fn spd_inverse(a: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| Error::Singular(format!("{what}: Cholesky failed ({e:?})")))?;
    let mut inv = llt.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// `true` when the Cholesky factorisation succeeds.
pub fn is_positive_definite(a: MatRef<'_, f64>) -> bool {
    a.llt(Side::Lower).is_ok()
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| no_convergence(a))
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as
/// columns.
pub fn sym_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| no_convergence(a))?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

fn no_convergence(a: MatRef<'_, f64>) -> Error {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..a.nrows() {
        lo = lo.min(a[(i, i)]);
        hi = hi.max(a[(i, i)]);
    }
    Error::EigenNoConvergence {
        dim: a.nrows(),
        min_diag: lo,
        max_diag: hi,
    }
}

pub fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest absolute entry.
pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(libm::fabs(a[(i, j)]));
        }
    }
    m
}

/// Integer power by repeated squaring; `0^0 = 1`.
pub fn powi(base: f64, mut exp: usize) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}
