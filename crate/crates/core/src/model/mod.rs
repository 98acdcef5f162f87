//! Linear mixed model pieces of the design criterion.
//!
//! For a design with fixed-effect incidence `X`, genetic incidence `Z`,
//! residual covariance `σ²ₑR` and genetic covariance `G = σ²ₐK`, the
//! prediction error variance of the genetic effects is
//! `PEV = [Z'MZ/σ²ₑ + G⁻¹]⁻¹` with `M = R⁻¹ − R⁻¹X(X'R⁻¹X)⁻¹X'R⁻¹`.
//! A design is scored by the mean of the `k` largest eigenvalues of PEV, or
//! by its mean diagonal.

mod criterion;
mod kinship;
pub mod linalg;
mod pev;
mod residual;

use alloc::format;
use alloc::vec;

pub use criterion::DesignCriterion;
pub use kinship::KinshipMatrix;
pub use pev::{
    build_projection, information, objective, objective_from_information_spectrum, pev,
    DesignMatrices,
};
pub use residual::{build_residual, FieldLayout, ResidualModel};

use crate::{Error, Result};

/// Ridge added to a kinship matrix that is not positive definite.
pub const DEFAULT_KINSHIP_RIDGE: f64 = 1e-6;

/// Variance components of the model, in trait-variance units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComponents {
    sigma_a2: f64,
    sigma_e2: f64,
}

impl VarianceComponents {
    pub fn new(sigma_a2: f64, sigma_e2: f64) -> Result<Self> {
        let mut problems = vec![];
        if !(sigma_a2 > 0.0 && sigma_a2.is_finite()) {
            problems.push(format!("variance.sigma_a2: {sigma_a2} must be > 0"));
        }
        if !(sigma_e2 > 0.0 && sigma_e2.is_finite()) {
            problems.push(format!("variance.sigma_e2: {sigma_e2} must be > 0"));
        }
        if problems.is_empty() {
            Ok(Self { sigma_a2, sigma_e2 })
        } else {
            Err(Error::InvalidSpec(problems))
        }
    }

    /// Narrow-sense heritability with the residual scale fixed at one:
    /// `σ²ₐ = h²/(1 − h²)`, `σ²ₑ = 1`.
    pub fn from_heritability(h2: f64) -> Result<Self> {
        if !(h2 > 0.0 && h2 < 1.0) {
            return Err(Error::InvalidSpec(vec![format!(
                "variance.h2: {h2} outside (0, 1)"
            )]));
        }
        Self::new(h2 / (1.0 - h2), 1.0)
    }

    pub fn sigma_a2(&self) -> f64 {
        self.sigma_a2
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Mean of the `k_eigen` largest PEV eigenvalues.
    TruncatedEigen,
    /// `trace(PEV)/n`.
    FullTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveConfig {
    pub k_eigen: usize,
    pub mode: ObjectiveMode,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self::truncated(3)
    }
}

impl ObjectiveConfig {
    pub fn truncated(k_eigen: usize) -> Self {
        Self {
            k_eigen,
            mode: ObjectiveMode::TruncatedEigen,
        }
    }

    pub fn full_trace() -> Self {
        Self {
            k_eigen: 1,
            mode: ObjectiveMode::FullTrace,
        }
    }

    pub fn validate(&self, n_genotypes: usize) -> Result<()> {
        if n_genotypes == 0 {
            return Err(Error::Config("objective over zero genotypes".into()));
        }
        if self.mode == ObjectiveMode::TruncatedEigen
            && !(1..=n_genotypes).contains(&self.k_eigen)
        {
            return Err(Error::Config(format!(
                "k_eigen = {} outside 1..={n_genotypes}",
                self.k_eigen
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heritability_mapping() {
        let vc = VarianceComponents::from_heritability(0.8).unwrap();
        assert!((vc.sigma_a2() - 4.0).abs() < 1e-12);
        assert_eq!(vc.sigma_e2(), 1.0);
        assert!(VarianceComponents::from_heritability(1.0).is_err());
        assert!(VarianceComponents::new(0.0, 1.0).is_err());
    }
}
