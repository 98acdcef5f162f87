//! Per-candidate scoring with everything that does not depend on the design
//! precomputed.
//!
//! A candidate is described by `rows[r] = genotype column of observation r`,
//! i.e. a row permutation of a fixed incidence matrix. The residual matrix,
//! the fixed effects and the kinship never change between candidates, so the
//! projection `M` (or its low-rank structure) and `G⁻¹` are built once.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use faer::{Mat, MatRef, Side};

use super::linalg::{self, spd_inverse};
use super::pev::{dependent_columns, objective_from_information_spectrum};
use super::ObjectiveConfig;
use crate::{Error, Result};

/// Relative gap under which two eigenvalues of the fixed part are treated as
/// one eigenspace.
const EIGENSPACE_TOL: f64 = 1e-9;
/// Relative pivot under which a projected direction is considered absent.
const RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct DesignCriterion {
    n_genotypes: usize,
    n_obs: usize,
    objective: ObjectiveConfig,
    backend: Backend,
}

#[derive(Debug, Clone)]
enum Backend {
    Dense {
        m: Mat<f64>,
        ginv: Mat<f64>,
        inv_se: f64,
    },
    LowRank(Box<LowRank>),
}

/// `C = A − W W'` with `A = D/σ²ₑ + G⁻¹` fixed and `W = Z'X·P/σₑ`,
/// `P P' = (X'X)⁻¹`.
#[derive(Debug, Clone)]
struct LowRank {
    a: Mat<f64>,
    /// Eigenvectors of `A` as rows (`Qᵀ`).
    q_t: Mat<f64>,
    groups: Vec<Eigenspace>,
    x: Mat<f64>,
    whiten: Mat<f64>,
    counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Eigenspace {
    start: usize,
    len: usize,
    value: f64,
}

impl DesignCriterion {
    /// General residual structure: `m` is the projection of
    /// [`build_projection`](super::build_projection).
    pub fn dense(
        m: Mat<f64>,
        genetic_precision: Mat<f64>,
        sigma_e2: f64,
        objective: ObjectiveConfig,
    ) -> Result<Self> {
        let n_genotypes = genetic_precision.nrows();
        objective.validate(n_genotypes)?;
        Ok(Self {
            n_genotypes,
            n_obs: m.nrows(),
            objective,
            backend: Backend::Dense {
                m,
                ginv: genetic_precision,
                inv_se: 1.0 / sigma_e2,
            },
        })
    }

    /// Independent residuals (`R = σ²ₑI`). `counts[g]` is the number of rows
    /// carrying genotype `g`; every candidate scored later must have the same
    /// counts. Uses the eigenspace reduction when it pays off, otherwise falls
    /// back to the dense path.
    pub fn identity_residual(
        x: Mat<f64>,
        counts: &[usize],
        genetic_precision: Mat<f64>,
        sigma_e2: f64,
        objective: ObjectiveConfig,
    ) -> Result<Self> {
        let n = genetic_precision.nrows();
        let n_obs = x.nrows();
        if counts.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: counts.len(),
            });
        }
        if counts.iter().sum::<usize>() != n_obs {
            return Err(Error::DimensionMismatch {
                expected: n_obs,
                found: counts.iter().sum(),
            });
        }
        objective.validate(n)?;
        let p = x.ncols();
        let xtx = x.transpose() * &x;
        let dependent = dependent_columns(xtx.as_ref());
        if !dependent.is_empty() {
            return Err(Error::RankDeficient { columns: dependent });
        }

        let inv_se = 1.0 / sigma_e2;
        let mut a = genetic_precision.clone();
        for (g, &c) in counts.iter().enumerate() {
            a[(g, g)] += c as f64 * inv_se;
        }
        let (values, vectors) = linalg::sym_eigen(a.as_ref())?;
        let groups = eigenspaces(&values);
        let reduced: usize = groups.iter().map(|g| g.len.min(p)).sum();

        if p > 0 && 2 * reduced <= n {
            let inv = spd_inverse(xtx.as_ref(), "X'X")?;
            let llt = inv
                .llt(Side::Lower)
                .map_err(|_| Error::Singular("(X'X)⁻¹".into()))?;
            let s = libm::sqrt(inv_se);
            let l = llt.L();
            let whiten = Mat::from_fn(p, p, |i, j| l[(i, j)] * s);
            return Ok(Self {
                n_genotypes: n,
                n_obs,
                objective,
                backend: Backend::LowRank(Box::new(LowRank {
                    a,
                    q_t: vectors.transpose().to_owned(),
                    groups,
                    x,
                    whiten,
                    counts: counts.to_vec(),
                })),
            });
        }

        // M = I − X(X'X)⁻¹X'
        let mut m = Mat::<f64>::identity(n_obs, n_obs);
        if p > 0 {
            let inv = spd_inverse(xtx.as_ref(), "X'X")?;
            let h = &x * &inv * x.transpose();
            m = &m - &h;
            linalg::symmetrize(&mut m);
        }
        Self::dense(m, genetic_precision, sigma_e2, objective)
    }

    pub fn n_genotypes(&self) -> usize {
        self.n_genotypes
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn objective_config(&self) -> &ObjectiveConfig {
        &self.objective
    }

    /// `true` when the eigenspace reduction is in use.
    pub fn is_low_rank(&self) -> bool {
        matches!(self.backend, Backend::LowRank(_))
    }

    /// Design criterion of the candidate.
    pub fn score(&self, rows: &[usize]) -> Result<f64> {
        let spectrum = self.spectrum(rows)?;
        objective_from_information_spectrum(&spectrum, &self.objective)
    }

    /// Ascending eigenvalues of the information matrix of the candidate.
    pub fn spectrum(&self, rows: &[usize]) -> Result<Vec<f64>> {
        self.check_rows(rows)?;
        match &self.backend {
            Backend::Dense { .. } => {
                let c = self.information(rows)?;
                linalg::sym_eigenvalues(c.as_ref())
            }
            Backend::LowRank(lr) => lr.spectrum(rows),
        }
    }

    /// Dense information matrix `Z'MZ/σ²ₑ + G⁻¹` of the candidate.
    pub fn information(&self, rows: &[usize]) -> Result<Mat<f64>> {
        self.check_rows(rows)?;
        let n = self.n_genotypes;
        match &self.backend {
            Backend::Dense { m, ginv, inv_se } => {
                let mut c = Mat::<f64>::zeros(n, n);
                for (q, &gq) in rows.iter().enumerate() {
                    for (p, &gp) in rows.iter().enumerate() {
                        c[(gp, gq)] += m[(p, q)];
                    }
                }
                for j in 0..n {
                    for i in 0..n {
                        c[(i, j)] = c[(i, j)] * inv_se + ginv[(i, j)];
                    }
                }
                linalg::symmetrize(&mut c);
                Ok(c)
            }
            Backend::LowRank(lr) => {
                let w = lr.projected_fixed(rows);
                let mut c = lr.a.clone();
                let wwt = &w * w.transpose();
                c = &c - &wwt;
                linalg::symmetrize(&mut c);
                Ok(c)
            }
        }
    }

    fn check_rows(&self, rows: &[usize]) -> Result<()> {
        if rows.len() != self.n_obs {
            return Err(Error::DimensionMismatch {
                expected: self.n_obs,
                found: rows.len(),
            });
        }
        if let Some(&g) = rows.iter().find(|&&g| g >= self.n_genotypes) {
            return Err(Error::InvalidArgument(alloc::format!(
                "genotype column {g} out of range 0..{}",
                self.n_genotypes
            )));
        }
        if let Backend::LowRank(lr) = &self.backend {
            debug_assert!({
                let mut c = vec![0usize; self.n_genotypes];
                rows.iter().for_each(|&g| c[g] += 1);
                c == lr.counts
            });
        }
        Ok(())
    }
}

impl LowRank {
    /// `W = Z'X·P/σₑ` (genotypes × fixed effects).
    fn projected_fixed(&self, rows: &[usize]) -> Mat<f64> {
        let n = self.a.nrows();
        let p = self.x.ncols();
        let mut zx = Mat::<f64>::zeros(n, p);
        for (r, &g) in rows.iter().enumerate() {
            for j in 0..p {
                zx[(g, j)] += self.x[(r, j)];
            }
        }
        &zx * &self.whiten
    }

    fn spectrum(&self, rows: &[usize]) -> Result<Vec<f64>> {
        let n = self.a.nrows();
        let p = self.x.ncols();
        let w = self.projected_fixed(rows);
        let u = &self.q_t * &w;

        // Per eigenspace of A, a factor S_k with S_k'S_k = U_k'U_k. The
        // invariant subspace spanned by these has matrix diag(μ) − S S'.
        let mut factors: Vec<(f64, Mat<f64>)> = Vec::with_capacity(self.groups.len());
        let mut spectrum = Vec::with_capacity(n);
        for g in &self.groups {
            let block = u.as_ref().subrows(g.start, g.len);
            let gram = block.transpose() * block;
            let s = gram_factor(gram.as_ref());
            for _ in 0..(g.len - s.nrows()) {
                spectrum.push(g.value);
            }
            if s.nrows() > 0 {
                factors.push((g.value, s));
            }
        }
        let r: usize = factors.iter().map(|(_, s)| s.nrows()).sum();
        if r > 0 {
            let mut stacked = Mat::<f64>::zeros(r, p);
            let mut diag = Vec::with_capacity(r);
            let mut at = 0;
            for (value, s) in &factors {
                for i in 0..s.nrows() {
                    for j in 0..p {
                        stacked[(at + i, j)] = s[(i, j)];
                    }
                    diag.push(*value);
                }
                at += s.nrows();
            }
            let mut t = &stacked * stacked.transpose();
            for j in 0..r {
                for i in 0..r {
                    t[(i, j)] = -t[(i, j)];
                }
                t[(j, j)] += diag[j];
            }
            linalg::symmetrize(&mut t);
            spectrum.extend(linalg::sym_eigenvalues(t.as_ref())?);
        }
        spectrum.sort_by(f64::total_cmp);
        Ok(spectrum)
    }
}

/// Groups of (numerically) equal ascending eigenvalues.
fn eigenspaces(ascending: &[f64]) -> Vec<Eigenspace> {
    let scale = ascending
        .iter()
        .fold(0.0f64, |m, v| m.max(libm::fabs(*v)))
        .max(f64::MIN_POSITIVE);
    let mut groups: Vec<Eigenspace> = Vec::new();
    let mut i = 0;
    while i < ascending.len() {
        let first = ascending[i];
        let mut j = i + 1;
        while j < ascending.len() && ascending[j] - first <= EIGENSPACE_TOL * scale {
            j += 1;
        }
        let value = ascending[i..j].iter().sum::<f64>() / (j - i) as f64;
        groups.push(Eigenspace {
            start: i,
            len: j - i,
            value,
        });
        i = j;
    }
    groups
}

/// Rank-revealing factor `S` (rank × p) with `S'S = gram`, by pivoted
/// Cholesky. Directions with pivots below `RANK_TOL·trace` are dropped.
fn gram_factor(gram: MatRef<'_, f64>) -> Mat<f64> {
    let p = gram.nrows();
    let trace: f64 = (0..p).map(|i| gram[(i, i)]).sum();
    if !(trace > 0.0) {
        return Mat::zeros(0, p);
    }
    let mut residual = gram.to_owned();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    loop {
        let (piv, best) = (0..p)
            .map(|i| (i, residual[(i, i)]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(best > RANK_TOL * trace) || rows.len() == p {
            break;
        }
        let root = libm::sqrt(best);
        let row: Vec<f64> = (0..p).map(|j| residual[(piv, j)] / root).collect();
        for a in 0..p {
            for b in 0..p {
                residual[(a, b)] -= row[a] * row[b];
            }
        }
        rows.push(row);
    }
    Mat::from_fn(rows.len(), p, |i, j| rows[i][j])
}
