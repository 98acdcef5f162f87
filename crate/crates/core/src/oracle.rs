//! Brute-force reference computations.
//!
//! Everything here is deliberately naive: the point is to be obviously
//! correct, not fast. Tests compare the production paths against these.

use alloc::format;
use alloc::vec::Vec;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef};

use crate::engine::{Permutation, PermutationProblem};
use crate::model::{FieldLayout, KinshipMatrix, VarianceComponents};
use crate::{Error, Result};

/// Largest dimension [`exhaustive_best`] accepts (9! = 362 880).
pub const MAX_EXHAUSTIVE_DIMENSION: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_perm: Permutation,
    pub best_value: f64,
    /// Feasible permutations evaluated.
    pub evaluated: u64,
}

/// Global minimum over every feasible permutation, enumerated in
/// lexicographic order. Ties go to the lexicographically smallest.
pub fn exhaustive_best<P: PermutationProblem + ?Sized>(problem: &P) -> Result<OracleResult> {
    let d = problem.dimension();
    if d > MAX_EXHAUSTIVE_DIMENSION {
        return Err(Error::OracleTooLarge(d));
    }
    let mut cur: Vec<usize> = (0..d).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut evaluated = 0u64;
    loop {
        let perm = Permutation::new(cur.clone())?;
        if problem.is_feasible(&perm) {
            let v = problem.evaluate(&perm)?;
            evaluated += 1;
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((cur.clone(), v));
            }
        }
        if !next_permutation(&mut cur) {
            break;
        }
    }
    let (p, v) = best.ok_or_else(|| Error::InvalidArgument("no feasible permutation".into()))?;
    Ok(OracleResult {
        best_perm: Permutation::new(p)?,
        best_value: v,
        evaluated,
    })
}

/// Advances to the next permutation in lexicographic order; `false` after
/// the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Inverse by LU with partial pivoting, refusing results that do not
/// reproduce the identity.
fn lu_inverse(a: MatRef<'_, f64>, what: &str) -> Result<Mat<f64>> {
    let n = a.nrows();
    let inv = a.partial_piv_lu().inverse();
    let check = a * &inv;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            let e = check[(i, j)] - target;
            if !(e.abs() < 1e-6) {
                return Err(Error::Singular(format!("{what} is numerically singular")));
            }
        }
    }
    Ok(inv)
}

/// PEV as the genetic block of the inverted mixed model coefficient matrix
/// `[X'V X, X'V Z; Z'V X, Z'V Z + G⁻¹]` with `V = R⁻¹/σ²ₑ`.
pub fn pev_via_mme(
    x: MatRef<'_, f64>,
    z: MatRef<'_, f64>,
    r: MatRef<'_, f64>,
    kinship: &KinshipMatrix,
    vc: &VarianceComponents,
) -> Result<Mat<f64>> {
    let n = z.nrows();
    let (p, q) = (x.ncols(), z.ncols());
    if x.nrows() != n || r.nrows() != n || r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if x.nrows() != n { x.nrows() } else { r.nrows() },
        });
    }
    if kinship.n_genotypes() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            found: kinship.n_genotypes(),
        });
    }
    let v = lu_inverse(r, "R")? * (1.0 / vc.sigma_e2());
    let g = kinship.values() * vc.sigma_a2();
    let ginv = lu_inverse(g.as_ref(), "G")?;

    let w = Mat::from_fn(n, p + q, |i, j| if j < p { x[(i, j)] } else { z[(i, j - p)] });
    let mut c = w.transpose() * &v * &w;
    for j in 0..q {
        for i in 0..q {
            c[(p + i, p + j)] += ginv[(i, j)];
        }
    }
    let cinv = lu_inverse(c.as_ref(), "mixed model coefficient matrix")?;
    Ok(Mat::from_fn(q, q, |i, j| cinv[(p + i, p + j)]))
}

fn ar1(rho: f64, n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| libm::pow(rho, i.abs_diff(j) as f64))
}

/// Residual matrix as `AR1(ρ_r, rows) ⊗ AR1(ρ_c, cols)` cut to the plots of
/// the layout, with `1 + nugget` on the diagonal.
pub fn kron_ar1_reference(layout: &FieldLayout, rho_r: f64, rho_c: f64, nugget: f64) -> Mat<f64> {
    let full = ar1(rho_r, layout.rows()).kron(ar1(rho_c, layout.cols()));
    let n = layout.n_plots();
    let mut out = full.as_ref().submatrix(0, 0, n, n).to_owned();
    for i in 0..n {
        out[(i, i)] = 1.0 + nugget;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::hamming;
    use crate::model::{build_residual, pev, ResidualModel};

    struct Const(usize);

    impl PermutationProblem for Const {
        fn dimension(&self) -> usize {
            self.0
        }
        fn evaluate(&self, _: &Permutation) -> Result<f64> {
            Ok(1.0)
        }
    }

    struct Target(Permutation);

    impl PermutationProblem for Target {
        fn dimension(&self) -> usize {
            self.0.len()
        }
        fn evaluate(&self, p: &Permutation) -> Result<f64> {
            Ok(hamming(p, &self.0)? as f64)
        }
    }

    #[test]
    fn constant_objective_tie_break() {
        let r = exhaustive_best(&Const(3)).unwrap();
        assert_eq!(r.best_perm.one_based(), alloc::vec![1, 2, 3]);
        assert_eq!(r.evaluated, 6);
    }

    #[test]
    fn finds_target() {
        let t = Permutation::from_one_based(&[3, 1, 4, 2]).unwrap();
        let r = exhaustive_best(&Target(t.clone())).unwrap();
        assert_eq!(r.best_perm, t);
        assert_eq!(r.best_value, 0.0);
        assert_eq!(r.evaluated, 24);
    }

    #[test]
    fn refuses_large() {
        assert!(matches!(exhaustive_best(&Const(10)), Err(Error::OracleTooLarge(10))));
    }

    #[test]
    fn mme_trivial() {
        let z = Mat::<f64>::identity(2, 2);
        let x = Mat::<f64>::zeros(2, 0);
        let r = Mat::<f64>::identity(2, 2);
        let vc = VarianceComponents::new(1.0, 1.0).unwrap();
        let p = pev_via_mme(x.as_ref(), z.as_ref(), r.as_ref(), &KinshipMatrix::identity(2), &vc).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[(i, j)] - if i == j { 0.5 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mme_matches_projection_with_intercept() {
        let z = Mat::<f64>::identity(4, 4);
        let x = Mat::from_fn(4, 1, |_, _| 1.0);
        let r = Mat::<f64>::identity(4, 4);
        let vc = VarianceComponents::new(2.0, 0.5).unwrap();
        let k = KinshipMatrix::identity(4);
        let a = pev_via_mme(x.as_ref(), z.as_ref(), r.as_ref(), &k, &vc).unwrap();
        let m = crate::model::build_projection(r.as_ref(), x.as_ref()).unwrap();
        let b = pev(z.as_ref(), m.as_ref(), &k, &vc).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[(i, j)] - b[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kron_reference_cases() {
        let l = FieldLayout::rect(1, 4).unwrap();
        let k = kron_ar1_reference(&l, 0.3, 0.5, 0.2);
        assert_eq!(k[(0, 0)], 1.2);
        assert!((k[(0, 2)] - 0.25).abs() < 1e-15);

        let l = FieldLayout::new(3, 4, 2).unwrap();
        let z = kron_ar1_reference(&l, 0.0, 0.0, 0.1);
        assert_eq!(z.nrows(), 10);
        assert!((0..10).all(|i| (0..10).all(|j| z[(i, j)] == if i == j { 1.1 } else { 0.0 })));

        let l = FieldLayout::rect(3, 4).unwrap();
        let model = ResidualModel::Ar1xAr1 { rho_r: 0.5, rho_c: 0.5, nugget: 0.0 };
        let a = build_residual(&l, &model).unwrap();
        let b = kron_ar1_reference(&l, 0.5, 0.5, 0.0);
        assert!((0..12).all(|i| (0..12).all(|j| (a[(i, j)] - b[(i, j)]).abs() < 1e-12)));
    }
}
