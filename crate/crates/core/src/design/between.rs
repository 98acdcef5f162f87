use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::RngCore;

use super::spec::TrialSpec;
use crate::engine::{Permutation, PermutationProblem};
use crate::model::{DesignCriterion, DesignMatrices, ObjectiveConfig};
use crate::{Error, Result};

/// Attempts of the randomized constructive start before giving up.
const START_ATTEMPTS: usize = 10;

/// Genotype per experimental slot. Slots are grouped by location in
/// location order; `slot_location[s]` is fixed by the spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetweenAssignment {
    pub slot_location: Vec<usize>,
    /// Spec genotype index occupying each slot.
    pub slots: Vec<usize>,
}

impl BetweenAssignment {
    /// Spec genotype indices at location `loc`, in slot order.
    pub fn at_location(&self, loc: usize) -> Vec<usize> {
        self.slots
            .iter()
            .zip(&self.slot_location)
            .filter(|(_, &l)| l == loc)
            .map(|(&g, _)| g)
            .collect()
    }
}

/// Slot structure of the between-location phase: which location each slot
/// belongs to and which genotype each entry (genotype copy) carries.
#[derive(Debug, Clone)]
pub struct SlotModel {
    /// Spec index of each local (experimental) genotype.
    genotypes: Vec<usize>,
    presence: Vec<usize>,
    n_locations: usize,
    slot_location: Vec<usize>,
    ranges: Vec<Range<usize>>,
    /// Local genotype carried by each entry.
    entry_genotype: Vec<usize>,
    first_entry: Vec<usize>,
}

impl SlotModel {
    pub fn from_spec(spec: &TrialSpec) -> Result<Self> {
        spec.validate()?;
        let genotypes = spec.experimentals();
        if genotypes.is_empty() {
            return Err(Error::InvalidSpec(vec!["genotypes: no experimental genotypes".into()]));
        }
        let presence: Vec<usize> = genotypes.iter().map(|&g| spec.presence_of(g)).collect();
        let n_locations = spec.locations.len();
        let mut slot_location = Vec::new();
        let mut ranges = Vec::with_capacity(n_locations);
        for loc in 0..n_locations {
            let start = slot_location.len();
            slot_location.extend(core::iter::repeat_n(loc, spec.experimental_capacity(loc)));
            ranges.push(start..slot_location.len());
        }
        let required: usize = presence.iter().sum();
        if required != slot_location.len() {
            return Err(Error::CapacityMismatch {
                required,
                available: slot_location.len(),
            });
        }
        let mut entry_genotype = Vec::with_capacity(required);
        let mut first_entry = Vec::with_capacity(genotypes.len());
        for (g, &k) in presence.iter().enumerate() {
            first_entry.push(entry_genotype.len());
            entry_genotype.extend(core::iter::repeat_n(g, k));
        }
        Ok(Self {
            genotypes,
            presence,
            n_locations,
            slot_location,
            ranges,
            entry_genotype,
            first_entry,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.slot_location.len()
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn slot_location(&self) -> &[usize] {
        &self.slot_location
    }

    /// Spec indices of the experimental genotypes, i.e. the columns of `Z`.
    pub fn genotypes(&self) -> &[usize] {
        &self.genotypes
    }

    /// Local genotype (column of `Z`) occupying each slot.
    pub fn rows(&self, perm: &Permutation) -> Vec<usize> {
        perm.as_slice().iter().map(|&e| self.entry_genotype[e]).collect()
    }

    pub fn assignment(&self, perm: &Permutation) -> BetweenAssignment {
        BetweenAssignment {
            slot_location: self.slot_location.clone(),
            slots: perm
                .as_slice()
                .iter()
                .map(|&e| self.genotypes[self.entry_genotype[e]])
                .collect(),
        }
    }

    /// Permutation realising `assignment`; copies of one genotype are
    /// numbered in slot order.
    pub fn permutation(&self, assignment: &BetweenAssignment) -> Result<Permutation> {
        if assignment.slots.len() != self.n_slots() || assignment.slot_location != self.slot_location {
            return Err(Error::DimensionMismatch {
                expected: self.n_slots(),
                found: assignment.slots.len(),
            });
        }
        let mut local = vec![usize::MAX; self.genotypes.iter().max().map_or(0, |m| m + 1)];
        for (i, &g) in self.genotypes.iter().enumerate() {
            local[g] = i;
        }
        let mut used = vec![0usize; self.genotypes.len()];
        let mut out = Vec::with_capacity(self.n_slots());
        for &g in &assignment.slots {
            let l = local.get(g).copied().unwrap_or(usize::MAX);
            if l == usize::MAX || used[l] == self.presence[l] {
                return Err(Error::InvalidArgument(alloc::format!(
                    "genotype {g} is not an experimental with a free copy"
                )));
            }
            out.push(self.first_entry[l] + used[l]);
            used[l] += 1;
        }
        let perm = Permutation::new(out)?;
        if !self.is_feasible(&perm) {
            return Err(Error::InvalidArgument("genotype repeated within a location".into()));
        }
        Ok(perm)
    }

    fn occupies(&self, perm: &Permutation, loc: usize, g: usize) -> bool {
        self.ranges[loc].clone().any(|s| self.entry_genotype[perm[s]] == g)
    }

    pub fn step_feasible(&self, perm: &Permutation, i: usize, j: usize) -> bool {
        let (li, lj) = (self.slot_location[i], self.slot_location[j]);
        if li == lj {
            return true;
        }
        let (gi, gj) = (self.entry_genotype[perm[i]], self.entry_genotype[perm[j]]);
        gi == gj || !(self.occupies(perm, lj, gi) || self.occupies(perm, li, gj))
    }

    pub fn is_feasible(&self, perm: &Permutation) -> bool {
        if perm.len() != self.n_slots() {
            return false;
        }
        let mut stamp = vec![usize::MAX; self.genotypes.len()];
        for (loc, r) in self.ranges.iter().enumerate() {
            for s in r.clone() {
                let g = self.entry_genotype[perm[s]];
                if stamp[g] == loc {
                    return false;
                }
                stamp[g] = loc;
            }
        }
        true
    }

    /// Randomized constructive start: genotypes in random order (larger
    /// presence first) each go to the locations with the most free slots,
    /// ties broken at random; each location is then shuffled.
    pub fn random_permutation(&self, rng: &mut dyn RngCore) -> Result<Permutation> {
        for _ in 0..START_ATTEMPTS {
            if let Some(p) = self.try_construct(rng) {
                return Ok(p);
            }
        }
        Err(Error::InfeasibleStart {
            attempts: START_ATTEMPTS,
        })
    }

    fn try_construct(&self, rng: &mut dyn RngCore) -> Option<Permutation> {
        let mut free: Vec<usize> = self.ranges.iter().map(|r| r.len()).collect();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.n_locations];
        let mut order: Vec<usize> = (0..self.genotypes.len()).collect();
        order.shuffle(rng);
        order.sort_by(|a, b| self.presence[*b].cmp(&self.presence[*a]));
        let mut locs: Vec<usize> = (0..self.n_locations).collect();
        for g in order {
            locs.shuffle(rng);
            locs.sort_by(|a, b| free[*b].cmp(&free[*a]));
            let k = self.presence[g];
            if k > locs.len() || free[locs[k - 1]] == 0 {
                return None;
            }
            for &l in &locs[..k] {
                free[l] -= 1;
                members[l].push(g);
            }
        }
        let mut used = vec![0usize; self.genotypes.len()];
        let mut out = Vec::with_capacity(self.n_slots());
        for m in members.iter_mut() {
            m.shuffle(rng);
            for &g in m.iter() {
                out.push(self.first_entry[g] + used[g]);
                used[g] += 1;
            }
        }
        Permutation::new(out).ok()
    }
}

/// Random feasible between-location assignment for `spec`.
pub fn random_start_between(spec: &TrialSpec, rng: &mut dyn RngCore) -> Result<BetweenAssignment> {
    let model = SlotModel::from_spec(spec)?;
    let perm = model.random_permutation(rng)?;
    Ok(model.assignment(&perm))
}

/// Allocation of experimental genotypes to locations: `perm[s]` is the entry
/// placed in slot `s`. Scored with independent residuals and one fixed mean
/// per location; checks are left out.
#[derive(Debug, Clone)]
pub struct BetweenProblem {
    slots: SlotModel,
    criterion: DesignCriterion,
    ridge_used: Option<f64>,
}

impl BetweenProblem {
    pub fn new(spec: &TrialSpec, objective: ObjectiveConfig) -> Result<Self> {
        let slots = SlotModel::from_spec(spec)?;
        let kinship = spec.kinship_matrix()?.submatrix(&slots.genotypes);
        let (ginv, ridge_used) =
            kinship.genetic_precision(spec.variance.sigma_a2(), spec.kinship_ridge)?;
        let x = location_incidence(&slots);
        let criterion = DesignCriterion::identity_residual(
            x,
            &slots.presence,
            ginv,
            spec.variance.sigma_e2(),
            objective,
        )?;
        Ok(Self {
            slots,
            criterion,
            ridge_used,
        })
    }

    pub fn slots(&self) -> &SlotModel {
        &self.slots
    }

    pub fn criterion(&self) -> &DesignCriterion {
        &self.criterion
    }

    /// Ridge added to the kinship, if it had to be regularised.
    pub fn ridge_used(&self) -> Option<f64> {
        self.ridge_used
    }

    pub fn assignment(&self, perm: &Permutation) -> BetweenAssignment {
        self.slots.assignment(perm)
    }

    /// `X` (slot × location indicators) and `Z` (slot × genotype) of the
    /// candidate.
    pub fn design_matrices(&self, perm: &Permutation) -> Result<DesignMatrices> {
        let rows = self.slots.rows(perm);
        let z = Mat::from_fn(rows.len(), self.slots.genotypes.len(), |i, j| {
            if rows[i] == j {
                1.0
            } else {
                0.0
            }
        });
        DesignMatrices::new(location_incidence(&self.slots), z)
    }
}

/// One indicator column per location that has experimental slots.
fn location_incidence(slots: &SlotModel) -> Mat<f64> {
    let active: Vec<usize> = (0..slots.n_locations)
        .filter(|&l| !slots.ranges[l].is_empty())
        .collect();
    Mat::from_fn(slots.n_slots(), active.len(), |s, c| {
        if slots.slot_location[s] == active[c] {
            1.0
        } else {
            0.0
        }
    })
}

impl PermutationProblem for BetweenProblem {
    fn dimension(&self) -> usize {
        self.slots.n_slots()
    }

    fn evaluate(&self, perm: &Permutation) -> Result<f64> {
        self.criterion.score(&self.slots.rows(perm))
    }

    fn step_feasible(&self, perm: &Permutation, i: usize, j: usize) -> bool {
        self.slots.step_feasible(perm, i, j)
    }

    fn is_feasible(&self, perm: &Permutation) -> bool {
        self.slots.is_feasible(perm)
    }

    fn random_initial(&self, rng: &mut dyn RngCore) -> Result<Permutation> {
        self.slots.random_permutation(rng)
    }
}
