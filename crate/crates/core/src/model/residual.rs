use alloc::format;
use alloc::vec::Vec;

use faer::Mat;

use super::linalg::powi;
use crate::{Error, Result};

/// Rectangular field of `rows × cols` plots whose last row may be shorter.
/// Plots are numbered row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    rows: usize,
    cols: usize,
    last_row_cols: usize,
}

impl FieldLayout {
    pub fn new(rows: usize, cols: usize, last_row_cols: usize) -> Result<Self> {
        let mut problems = Vec::new();
        if rows == 0 {
            problems.push(format!("rows: must be >= 1"));
        }
        if cols == 0 {
            problems.push(format!("cols: must be >= 1"));
        }
        if last_row_cols == 0 || last_row_cols > cols {
            problems.push(format!("last_row_cols: {last_row_cols} not in 1..={cols}"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidSpec(problems));
        }
        Ok(Self {
            rows,
            cols,
            last_row_cols,
        })
    }

    /// A full rectangle.
    pub fn rect(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn last_row_cols(&self) -> usize {
        self.last_row_cols
    }

    /// `c·(r−1) + c_l`
    pub fn n_plots(&self) -> usize {
        self.cols * (self.rows - 1) + self.last_row_cols
    }

    /// Zero-based `(row, col)` of zero-based plot `index`.
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Inverse of [`position`](Self::position), `None` outside the field.
    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.rows || col >= self.cols {
            return None;
        }
        let i = row * self.cols + col;
        (i < self.n_plots()).then_some(i)
    }
}

/// Residual covariance structure over the plots of one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualModel {
    Identity,
    /// Separable first-order autoregressive correlation: `rho_r` between
    /// neighbouring rows, `rho_c` between neighbouring columns, plus a nugget
    /// on the diagonal.
    Ar1xAr1 { rho_r: f64, rho_c: f64, nugget: f64 },
}

impl ResidualModel {
    pub fn validate(&self) -> Result<()> {
        if let ResidualModel::Ar1xAr1 { rho_r, rho_c, nugget } = *self {
            let mut problems = Vec::new();
            if !(0.0..1.0).contains(&rho_r) {
                problems.push(format!("residual.rho_r: {rho_r} outside [0, 1)"));
            }
            if !(0.0..1.0).contains(&rho_c) {
                problems.push(format!("residual.rho_c: {rho_c} outside [0, 1)"));
            }
            if !(nugget >= 0.0) {
                problems.push(format!("residual.nugget: {nugget} must be >= 0"));
            }
            if !problems.is_empty() {
                return Err(Error::InvalidSpec(problems));
            }
        }
        Ok(())
    }

    /// Diagonal value `ψ = 1 + nugget`.
    pub fn psi(&self) -> f64 {
        match *self {
            ResidualModel::Identity => 1.0,
            ResidualModel::Ar1xAr1 { nugget, .. } => 1.0 + nugget,
        }
    }
}

/// Residual matrix `R` over the `n_plots` plots of `layout`:
/// `R_ii = ψ`, `R_ij = ρ_r^|Δrow| · ρ_c^|Δcol|`.
pub fn build_residual(layout: &FieldLayout, model: &ResidualModel) -> Result<Mat<f64>> {
    model.validate()?;
    let n = layout.n_plots();
    Ok(match *model {
        ResidualModel::Identity => Mat::identity(n, n),
        ResidualModel::Ar1xAr1 { rho_r, rho_c, .. } => {
            let psi = model.psi();
            Mat::from_fn(n, n, |i, j| {
                if i == j {
                    return psi;
                }
                let (ri, ci) = layout.position(i);
                let (rj, cj) = layout.position(j);
                powi(rho_r, ri.abs_diff(rj)) * powi(rho_c, ci.abs_diff(cj))
            })
        }
    })
}
