use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::RngCore;

use super::spec::{FixedEffects, Role, TrialSpec};
use crate::engine::{Permutation, PermutationProblem};
use crate::model::{
    build_projection, build_residual, DesignCriterion, DesignMatrices, FieldLayout, ObjectiveConfig,
};
use crate::{Error, Result};

/// Genotype per plot of one field, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithinPlacement {
    /// Spec genotype index occupying each plot.
    pub plots: Vec<usize>,
}

impl WithinPlacement {
    pub fn check_mask(&self, spec: &TrialSpec) -> Vec<bool> {
        self.plots
            .iter()
            .map(|&g| spec.genotypes[g].role == Role::Check)
            .collect()
    }

    pub fn family_labels(&self, spec: &TrialSpec) -> Vec<usize> {
        let labels = spec.family_labels();
        self.plots.iter().map(|&g| labels[g]).collect()
    }
}

/// Start design of the within-location phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WithinStart {
    /// All check replicates in the first plots, then the experimentals.
    ClusteredChecks,
    /// Entries sorted by family, so families fill consecutive plots.
    FamilyStriped,
    Random,
}

impl WithinStart {
    pub const ALL: [WithinStart; 3] = [Self::ClusteredChecks, Self::FamilyStriped, Self::Random];

    pub fn name(self) -> &'static str {
        match self {
            Self::ClusteredChecks => "clustered_checks",
            Self::FamilyStriped => "family_striped",
            Self::Random => "random",
        }
    }
}

impl core::str::FromStr for WithinStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown start design {s:?}")))
    }
}

/// Layout of one field: `perm[p]` is the entry planted in plot `p`. Entries
/// are the allocated experimentals followed by the check replicates, which
/// share one `Z` column per check.
#[derive(Debug, Clone)]
pub struct WithinProblem {
    location: usize,
    layout: FieldLayout,
    /// Spec index of each local genotype (column of `Z`).
    genotypes: Vec<usize>,
    entry_genotype: Vec<usize>,
    x: Mat<f64>,
    criterion: DesignCriterion,
    ridge_used: Option<f64>,
}

impl WithinProblem {
    /// `allocation` lists the experimental genotypes (spec indices) placed at
    /// `location`; checks are added from the spec's replication counts.
    pub fn new(
        spec: &TrialSpec,
        location: usize,
        allocation: &[usize],
        objective: ObjectiveConfig,
    ) -> Result<Self> {
        spec.validate()?;
        let loc = spec.locations.get(location).ok_or_else(|| {
            Error::InvalidArgument(format!("location index {location} out of range"))
        })?;
        let layout = loc.layout().ok_or_else(|| {
            Error::InvalidSpec(vec![format!(
                "locations[{location}]: rows/cols needed for the within-location phase"
            )])
        })?;
        let mut seen = vec![false; spec.genotypes.len()];
        for &g in allocation {
            match spec.genotypes.get(g) {
                None => return Err(Error::InvalidArgument(format!("genotype index {g} out of range"))),
                Some(gen) if gen.role != Role::Experimental => {
                    return Err(Error::InvalidArgument(format!(
                        "allocation contains check {}",
                        gen.id
                    )))
                }
                _ => {}
            }
            if seen[g] {
                return Err(Error::InvalidArgument(format!(
                    "allocation repeats {}",
                    spec.genotypes[g].id
                )));
            }
            seen[g] = true;
        }

        let mut genotypes = allocation.to_vec();
        let mut entry_genotype: Vec<usize> = (0..allocation.len()).collect();
        for c in spec.checks() {
            let reps = spec.check_reps_at(location, c);
            if reps > 0 {
                entry_genotype.extend(core::iter::repeat_n(genotypes.len(), reps));
                genotypes.push(c);
            }
        }
        if entry_genotype.len() != layout.n_plots() {
            return Err(Error::CapacityMismatch {
                required: entry_genotype.len(),
                available: layout.n_plots(),
            });
        }

        let kinship = spec.kinship_matrix()?.submatrix(&genotypes);
        let (ginv, ridge_used) =
            kinship.genetic_precision(spec.variance.sigma_a2(), spec.kinship_ridge)?;
        let r = build_residual(&layout, &spec.residual)?;
        let x = fixed_effects(&spec.fixed_effects, layout.n_plots());
        let m = build_projection(r.as_ref(), x.as_ref())?;
        let criterion = DesignCriterion::dense(m, ginv, spec.variance.sigma_e2(), objective)?;
        Ok(Self {
            location,
            layout,
            genotypes,
            entry_genotype,
            x,
            criterion,
            ridge_used,
        })
    }

    /// All experimentals of a single-location spec.
    pub fn single_location(spec: &TrialSpec, objective: ObjectiveConfig) -> Result<Self> {
        if spec.locations.len() != 1 {
            return Err(Error::InvalidSpec(vec![format!(
                "locations: {} given, an allocation is needed unless there is exactly one",
                spec.locations.len()
            )]));
        }
        Self::new(spec, 0, &spec.experimentals(), objective)
    }

    pub fn location(&self) -> usize {
        self.location
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }

    /// Spec indices of the columns of `Z`.
    pub fn genotypes(&self) -> &[usize] {
        &self.genotypes
    }

    pub fn criterion(&self) -> &DesignCriterion {
        &self.criterion
    }

    pub fn ridge_used(&self) -> Option<f64> {
        self.ridge_used
    }

    pub fn rows(&self, perm: &Permutation) -> Vec<usize> {
        perm.as_slice().iter().map(|&e| self.entry_genotype[e]).collect()
    }

    pub fn placement(&self, perm: &Permutation) -> WithinPlacement {
        WithinPlacement {
            plots: self.rows(perm).into_iter().map(|c| self.genotypes[c]).collect(),
        }
    }

    /// Permutation realising `placement`; replicates of a check are numbered
    /// in plot order.
    pub fn permutation(&self, placement: &WithinPlacement) -> Result<Permutation> {
        let n = self.entry_genotype.len();
        if placement.plots.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: placement.plots.len(),
            });
        }
        let mut next: Vec<usize> = vec![usize::MAX; self.genotypes.len()];
        for (e, &c) in self.entry_genotype.iter().enumerate().rev() {
            next[c] = e;
        }
        let mut out = Vec::with_capacity(n);
        for &g in &placement.plots {
            let c = self.genotypes.iter().position(|&x| x == g).ok_or_else(|| {
                Error::InvalidArgument(format!("genotype {g} not allocated to this location"))
            })?;
            let e = next[c];
            if e >= n || self.entry_genotype[e] != c {
                return Err(Error::InvalidArgument(format!("genotype {g} placed too often")));
            }
            out.push(e);
            next[c] = e + 1;
        }
        Permutation::new(out)
    }

    pub fn start(&self, kind: WithinStart, spec: &TrialSpec, rng: &mut dyn RngCore) -> Permutation {
        let n = self.entry_genotype.len();
        let mut entries: Vec<usize> = (0..n).collect();
        match kind {
            WithinStart::ClusteredChecks => {
                entries.sort_by_key(|&e| spec.genotypes[self.genotypes[self.entry_genotype[e]]].role != Role::Check);
            }
            WithinStart::FamilyStriped => {
                let labels = spec.family_labels();
                entries.sort_by_key(|&e| labels[self.genotypes[self.entry_genotype[e]]]);
            }
            WithinStart::Random => entries.shuffle(rng),
        }
        Permutation::new(entries).expect("entries form a permutation")
    }

    pub fn design_matrices(&self, perm: &Permutation) -> Result<DesignMatrices> {
        let rows = self.rows(perm);
        let z = Mat::from_fn(rows.len(), self.genotypes.len(), |i, j| {
            if rows[i] == j {
                1.0
            } else {
                0.0
            }
        });
        DesignMatrices::new(self.x.clone(), z)
    }
}

fn fixed_effects(fe: &FixedEffects, n: usize) -> Mat<f64> {
    match fe {
        FixedEffects::Intercept | FixedEffects::PerLocation => Mat::from_fn(n, 1, |_, _| 1.0),
        FixedEffects::PerBlock(blocks) => {
            let mut labels = blocks.clone();
            labels.sort_unstable();
            labels.dedup();
            Mat::from_fn(n, labels.len(), |i, j| {
                if blocks[i] == labels[j] {
                    1.0
                } else {
                    0.0
                }
            })
        }
    }
}

impl PermutationProblem for WithinProblem {
    fn dimension(&self) -> usize {
        self.entry_genotype.len()
    }

    fn evaluate(&self, perm: &Permutation) -> Result<f64> {
        self.criterion.score(&self.rows(perm))
    }
}
