use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;

use super::linalg;
use crate::{Error, Result};

/// Symmetric relatedness matrix among genotypes.
#[derive(Debug, Clone, PartialEq)]
pub struct KinshipMatrix {
    values: Mat<f64>,
}

impl KinshipMatrix {
    /// Unrelated genotypes.
    pub fn identity(n: usize) -> Self {
        Self {
            values: Mat::identity(n, n),
        }
    }

    /// Block-diagonal kinship for independent families of full siblings:
    /// ones on the diagonal, `off_diag` between members of the same family,
    /// zero across families. Families occupy consecutive genotype indices in
    /// the order given.
    pub fn family_blocks(family_sizes: &[usize], off_diag: f64) -> Result<Self> {
        if family_sizes.is_empty() {
            return Err(Error::InvalidSpec(vec!["kinship.families: empty".to_string()]));
        }
        if let Some(pos) = family_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidSpec(vec![format!(
                "kinship.families[{pos}]: family size must be >= 1"
            )]));
        }
        let labels: Vec<usize> = family_sizes
            .iter()
            .enumerate()
            .flat_map(|(f, &s)| core::iter::repeat_n(f, s))
            .collect();
        Self::from_family_labels(&labels, off_diag)
    }

    /// Same construction from a family label per genotype. Genotypes sharing a
    /// label are full siblings; labels need not be contiguous.
    pub fn from_family_labels(labels: &[usize], off_diag: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&off_diag) {
            return Err(Error::InvalidSpec(vec![format!(
                "kinship.off_diag: {off_diag} outside [0, 1)"
            )]));
        }
        let n = labels.len();
        let values = Mat::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else if labels[i] == labels[j] {
                off_diag
            } else {
                0.0
            }
        });
        Ok(Self { values })
    }

    /// Wraps an explicit matrix, e.g. marker-based. It must be square and
    /// exactly symmetric.
    pub fn from_matrix(values: Mat<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.ncols(),
            });
        }
        for j in 0..n {
            for i in (j + 1)..n {
                if values[(i, j)] != values[(j, i)] {
                    return Err(Error::InvalidArgument(format!(
                        "kinship matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n_genotypes(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    /// Principal submatrix over `indices`, in the order given.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let values = Mat::from_fn(indices.len(), indices.len(), |i, j| {
            self.values[(indices[i], indices[j])]
        });
        Self { values }
    }

    /// `G⁻¹ = (σ²ₐ K)⁻¹`. When `K` is not positive definite, `ridge·I` is
    /// added before inversion and the ridge actually used is returned.
    pub fn genetic_precision(&self, sigma_a2: f64, ridge: f64) -> Result<(Mat<f64>, Option<f64>)> {
        let n = self.n_genotypes();
        if let Ok(mut inv) = linalg::spd_inverse(self.values.as_ref(), "kinship") {
            scale(&mut inv, 1.0 / sigma_a2);
            return Ok((inv, None));
        }
        if ridge <= 0.0 {
            return Err(Error::Singular(
                "kinship is not positive definite and no ridge is configured".to_string(),
            ));
        }
        let mut k = self.values.clone();
        for i in 0..n {
            k[(i, i)] += ridge;
        }
        let mut inv = linalg::spd_inverse(k.as_ref(), "kinship + ridge")?;
        scale(&mut inv, 1.0 / sigma_a2);
        Ok((inv, Some(ridge)))
    }
}

fn scale(m: &mut Mat<f64>, s: f64) {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sibling_block() {
        let k = KinshipMatrix::family_blocks(&[2], 0.5).unwrap();
        assert_eq!(k.values()[(0, 0)], 1.0);
        assert_eq!(k.values()[(0, 1)], 0.5);
        assert_eq!(k.values()[(1, 0)], 0.5);
        assert_eq!(k.values()[(1, 1)], 1.0);
    }

    #[test]
    fn singleton_families_are_identity() {
        let k = KinshipMatrix::family_blocks(&[1, 1], 0.5).unwrap();
        assert_eq!(k, KinshipMatrix::identity(2));
    }

    #[test]
    fn paper_phase_one_blocks() {
        let k = KinshipMatrix::family_blocks(&[14, 187, 199], 0.5).unwrap();
        assert_eq!(k.n_genotypes(), 400);
        let v = k.values();
        assert_eq!(v[(0, 13)], 0.5);
        assert_eq!(v[(13, 14)], 0.0);
        assert_eq!(v[(14, 200)], 0.5);
        assert_eq!(v[(200, 201)], 0.0);
        assert_eq!(v[(201, 399)], 0.5);
        assert!((0..400).all(|i| v[(i, i)] == 1.0));
        let eig = linalg::sym_eigenvalues(v.as_ref()).unwrap();
        assert!(eig[0] >= -1e-8);
    }

    #[test]
    fn empty_family_list_rejected() {
        assert!(matches!(
            KinshipMatrix::family_blocks(&[], 0.5),
            Err(Error::InvalidSpec(_))
        ));
        assert!(KinshipMatrix::family_blocks(&[3], 1.0).is_err());
    }

    #[test]
    fn ridge_only_when_needed() {
        let k = KinshipMatrix::family_blocks(&[3], 0.5).unwrap();
        let (_, ridge) = k.genetic_precision(2.0, 1e-6).unwrap();
        assert_eq!(ridge, None);

        let singular = KinshipMatrix::from_matrix(Mat::from_fn(2, 2, |_, _| 1.0)).unwrap();
        let (ginv, ridge) = singular.genetic_precision(1.0, 1e-6).unwrap();
        assert_eq!(ridge, Some(1e-6));
        assert!(ginv[(0, 0)].is_finite());
        assert!(singular.genetic_precision(1.0, 0.0).is_err());
    }

    #[test]
    fn precision_scales_with_sigma() {
        let k = KinshipMatrix::identity(3);
        let (ginv, _) = k.genetic_precision(4.0, 1e-6).unwrap();
        assert_eq!(ginv[(1, 1)], 0.25);
        assert_eq!(ginv[(0, 1)], 0.0);
    }
}
