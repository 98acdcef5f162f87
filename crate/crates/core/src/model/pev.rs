use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef};

use super::kinship::KinshipMatrix;
use super::linalg::{self, spd_inverse, symmetrize};
use super::{ObjectiveConfig, ObjectiveMode, VarianceComponents, DEFAULT_KINSHIP_RIDGE};
use crate::{Error, Result};

/// Fixed-effect (`X`) and genetic (`Z`) incidence matrices of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub x: Mat<f64>,
    pub z: Mat<f64>,
}

impl DesignMatrices {
    pub fn new(x: Mat<f64>, z: Mat<f64>) -> Result<Self> {
        if x.nrows() != z.nrows() {
            return Err(Error::DimensionMismatch {
                expected: z.nrows(),
                found: x.nrows(),
            });
        }
        Ok(Self { x, z })
    }

    pub fn n_obs(&self) -> usize {
        self.z.nrows()
    }

    /// Every row of `Z` (and of `X`, when it has columns) holds exactly one
    /// 1 and zeros elsewhere.
    pub fn validate_incidence(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, m) in [("Z", &self.z), ("X", &self.x)] {
            if m.ncols() == 0 {
                continue;
            }
            for i in 0..m.nrows() {
                let mut ones = 0;
                for j in 0..m.ncols() {
                    match m[(i, j)] {
                        v if v == 1.0 => ones += 1,
                        v if v == 0.0 => {}
                        v => problems.push(format!("{name}[{i}, {j}] = {v} is not 0/1")),
                    }
                }
                if ones != 1 {
                    problems.push(format!("{name} row {i} has {ones} ones"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// `M = R⁻¹ − R⁻¹X(X'R⁻¹X)⁻¹X'R⁻¹`, or `R⁻¹` when `X` has no columns.
pub fn build_projection(r: MatRef<'_, f64>, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if r.nrows() != r.ncols() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            found: r.ncols(),
        });
    }
    if x.nrows() != r.nrows() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            found: x.nrows(),
        });
    }
    let r_inv = spd_inverse(r, "residual matrix")?;
    if x.ncols() == 0 {
        return Ok(r_inv);
    }
    let rinv_x = &r_inv * x;
    let xt_rinv_x = x.transpose() * &rinv_x;
    let dependent = dependent_columns(xt_rinv_x.as_ref());
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let inner = spd_inverse(xt_rinv_x.as_ref(), "X'R⁻¹X")?;
    let correction = &rinv_x * &inner * rinv_x.transpose();
    let mut m = &r_inv - &correction;
    symmetrize(&mut m);
    Ok(m)
}

/// Columns of a Gram matrix that are (numerically) linear combinations of
/// earlier columns, found by a Cholesky sweep that skips collapsed pivots.
pub(crate) fn dependent_columns(gram: MatRef<'_, f64>) -> Vec<usize> {
    let p = gram.nrows();
    let mut l = Mat::<f64>::zeros(p, p);
    let mut kept = vec![false; p];
    let mut dependent = Vec::new();
    for k in 0..p {
        let mut d = gram[(k, k)];
        for j in 0..k {
            if kept[j] {
                d -= l[(k, j)] * l[(k, j)];
            }
        }
        if !(d > 1e-10 * gram[(k, k)].abs().max(f64::MIN_POSITIVE)) {
            dependent.push(k);
            continue;
        }
        kept[k] = true;
        let lkk = libm::sqrt(d);
        l[(k, k)] = lkk;
        for i in (k + 1)..p {
            let mut s = gram[(i, k)];
            for j in 0..k {
                if kept[j] {
                    s -= l[(i, j)] * l[(k, j)];
                }
            }
            l[(i, k)] = s / lkk;
        }
    }
    dependent
}

/// Information matrix `Z'MZ/σ²ₑ + G⁻¹` of the random genetic effects.
pub fn information(
    z: MatRef<'_, f64>,
    m: MatRef<'_, f64>,
    genetic_precision: MatRef<'_, f64>,
    sigma_e2: f64,
) -> Result<Mat<f64>> {
    if z.nrows() != m.nrows() || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: z.nrows(),
        });
    }
    if genetic_precision.nrows() != z.ncols() {
        return Err(Error::DimensionMismatch {
            expected: z.ncols(),
            found: genetic_precision.nrows(),
        });
    }
    let ztm = z.transpose() * m;
    let mut c = &ztm * z;
    let inv_se = 1.0 / sigma_e2;
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] = c[(i, j)] * inv_se + genetic_precision[(i, j)];
        }
    }
    symmetrize(&mut c);
    Ok(c)
}

/// Prediction error variance `[Z'MZ + G⁻¹]⁻¹` with `G = σ²ₐK`.
pub fn pev(
    z: MatRef<'_, f64>,
    m: MatRef<'_, f64>,
    kinship: &KinshipMatrix,
    vc: &VarianceComponents,
) -> Result<Mat<f64>> {
    if kinship.n_genotypes() != z.ncols() {
        return Err(Error::DimensionMismatch {
            expected: z.ncols(),
            found: kinship.n_genotypes(),
        });
    }
    let (ginv, _) = kinship.genetic_precision(vc.sigma_a2(), DEFAULT_KINSHIP_RIDGE)?;
    let c = information(z, m, ginv.as_ref(), vc.sigma_e2())?;
    spd_inverse(c.as_ref(), "Z'MZ + G⁻¹")
}

/// Scalar design criterion of a PEV matrix; smaller is better.
pub fn objective(pev: MatRef<'_, f64>, cfg: &ObjectiveConfig) -> Result<f64> {
    let n = pev.nrows();
    cfg.validate(n)?;
    match cfg.mode {
        ObjectiveMode::FullTrace => {
            let trace: f64 = (0..n).map(|i| pev[(i, i)]).sum();
            Ok(trace / n as f64)
        }
        ObjectiveMode::TruncatedEigen => {
            let eig = linalg::sym_eigenvalues(pev)?;
            let top = &eig[n - cfg.k_eigen..];
            if eig[0] < -1e-8 * libm::fabs(eig[n - 1]).max(1.0) {
                return Err(Error::Singular(
                    "PEV matrix has a negative eigenvalue".to_string(),
                ));
            }
            Ok(top.iter().sum::<f64>() / cfg.k_eigen as f64)
        }
    }
}

/// The same criterion from the ascending eigenvalues of the information
/// matrix `C`: the PEV eigenvalues are their reciprocals.
pub fn objective_from_information_spectrum(ascending: &[f64], cfg: &ObjectiveConfig) -> Result<f64> {
    let n = ascending.len();
    cfg.validate(n)?;
    if !(ascending[0] > 0.0) {
        return Err(Error::Singular(format!(
            "information matrix has non-positive eigenvalue {:e}",
            ascending[0]
        )));
    }
    Ok(match cfg.mode {
        ObjectiveMode::TruncatedEigen => {
            // reciprocal of the smallest are the largest PEV eigenvalues; sum
            // from the k-th smallest down so the order matches `objective`
            let mut s = 0.0;
            for &v in ascending[..cfg.k_eigen].iter().rev() {
                s += 1.0 / v;
            }
            s / cfg.k_eigen as f64
        }
        ObjectiveMode::FullTrace => {
            let mut s = 0.0;
            for &v in ascending.iter().rev() {
                s += 1.0 / v;
            }
            s / n as f64
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Mat<f64> {
        Mat::from_fn(v.len(), 1, |i, _| v[i])
    }

    #[test]
    fn centering_projector() {
        let m = build_projection(Mat::<f64>::identity(2, 2).as_ref(), col(&[1.0, 1.0]).as_ref()).unwrap();
        assert!((m[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((m[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((m[(1, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_x_gives_r_inverse() {
        let x = Mat::<f64>::zeros(3, 0);
        let m = build_projection(Mat::<f64>::identity(3, 3).as_ref(), x.as_ref()).unwrap();
        assert_eq!(m, Mat::<f64>::identity(3, 3));
    }

    #[test]
    fn rank_deficiency_names_columns() {
        // intercept + two location indicators that sum to the intercept
        let x = Mat::from_fn(4, 3, |i, j| match j {
            0 => 1.0,
            1 => (i < 2) as u8 as f64,
            _ => (i >= 2) as u8 as f64,
        });
        match build_projection(Mat::<f64>::identity(4, 4).as_ref(), x.as_ref()) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pev_trivial_cases() {
        let i2 = Mat::<f64>::identity(2, 2);
        let k = KinshipMatrix::identity(2);
        let vc = VarianceComponents::new(1.0, 1.0).unwrap();
        let p = pev(i2.as_ref(), i2.as_ref(), &k, &vc).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15 && p[(0, 1)].abs() < 1e-15);
        let zero = Mat::<f64>::zeros(2, 2);
        let p = pev(i2.as_ref(), zero.as_ref(), &k, &vc).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-15 && (p[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_examples() {
        let d = Mat::from_fn(3, 3, |i, j| if i == j { [3.0, 2.0, 1.0][i] } else { 0.0 });
        let t2 = ObjectiveConfig::truncated(2);
        assert!((objective(d.as_ref(), &t2).unwrap() - 2.5).abs() < 1e-14);
        assert_eq!(objective(d.as_ref(), &ObjectiveConfig::full_trace()).unwrap(), 2.0);
        let id = Mat::<f64>::identity(5, 5);
        for k in 1..=5 {
            let v = objective(id.as_ref(), &ObjectiveConfig::truncated(k)).unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(objective(id.as_ref(), &ObjectiveConfig::truncated(6)).is_err());
        assert!(objective(id.as_ref(), &ObjectiveConfig::truncated(0)).is_err());
    }

    #[test]
    fn spectrum_route_matches() {
        let c = [0.5, 1.0, 4.0];
        let v = objective_from_information_spectrum(&c, &ObjectiveConfig::truncated(2)).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
        let v = objective_from_information_spectrum(&c, &ObjectiveConfig::full_trace()).unwrap();
        assert!((v - (2.0 + 1.0 + 0.25) / 3.0).abs() < 1e-15);
        assert!(objective_from_information_spectrum(&[0.0, 1.0], &ObjectiveConfig::truncated(1)).is_err());
    }

    #[test]
    fn incidence_validation() {
        let z = Mat::from_fn(2, 2, |i, j| (i == j) as u8 as f64);
        let x = Mat::from_fn(2, 1, |_, _| 1.0);
        DesignMatrices::new(x.clone(), z.clone()).unwrap().validate_incidence().unwrap();
        let bad = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(DesignMatrices::new(x, bad).unwrap().validate_incidence().is_err());
    }
}
