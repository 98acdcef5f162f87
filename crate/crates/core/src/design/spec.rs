use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{FieldLayout, KinshipMatrix, ResidualModel, VarianceComponents, DEFAULT_KINSHIP_RIDGE};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Experimental,
    Check,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Experimental => "experimental",
            Role::Check => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    pub id: String,
    pub family: Option<String>,
    pub role: Role,
    /// Number of locations this genotype must appear in, overriding
    /// [`TrialSpec::presence`]. Ignored for checks.
    pub presence: Option<usize>,
}

impl Genotype {
    pub fn experimental(id: impl Into<String>, family: Option<String>) -> Self {
        Self {
            id: id.into(),
            family,
            role: Role::Experimental,
            presence: None,
        }
    }

    pub fn check(id: impl Into<String>, family: Option<String>) -> Self {
        Self {
            id: id.into(),
            family,
            role: Role::Check,
            presence: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocationSize {
    Layout(FieldLayout),
    /// Plot count only; enough for the between-location phase.
    Plots(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: String,
    pub size: LocationSize,
    /// Replicates per check at this location, overriding
    /// [`TrialSpec::check_reps`].
    pub check_reps: Option<BTreeMap<String, usize>>,
}

impl Location {
    pub fn n_plots(&self) -> usize {
        match self.size {
            LocationSize::Layout(l) => l.n_plots(),
            LocationSize::Plots(n) => n,
        }
    }

    pub fn layout(&self) -> Option<FieldLayout> {
        match self.size {
            LocationSize::Layout(l) => Some(l),
            LocationSize::Plots(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KinshipSource {
    Identity,
    /// Genotypes of the same family share `off_diag`; genotypes without a
    /// family are unrelated to everyone.
    FamilyBlocks { off_diag: f64 },
    /// Ordered as [`TrialSpec::genotypes`].
    Explicit(KinshipMatrix),
}

/// Fixed effects of the within-location model. The between-location model
/// always uses one mean per location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixedEffects {
    Intercept,
    /// One mean per location; inside a single field this is an intercept.
    PerLocation,
    /// Block label per plot, row-major, one column per distinct label.
    PerBlock(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub genotypes: Vec<Genotype>,
    pub locations: Vec<Location>,
    /// Default number of locations per experimental genotype.
    pub presence: usize,
    /// Default replicates per check and location, by check id.
    pub check_reps: BTreeMap<String, usize>,
    pub kinship: KinshipSource,
    /// Within-location residual model.
    pub residual: ResidualModel,
    pub variance: VarianceComponents,
    pub fixed_effects: FixedEffects,
    pub kinship_ridge: f64,
}

impl TrialSpec {
    /// A spec with the given genotypes and locations and defaults elsewhere:
    /// presence 1, identity kinship and residual, `h² = 0.5`, intercept.
    pub fn new(genotypes: Vec<Genotype>, locations: Vec<Location>) -> Self {
        Self {
            genotypes,
            locations,
            presence: 1,
            check_reps: BTreeMap::new(),
            kinship: KinshipSource::Identity,
            residual: ResidualModel::Identity,
            variance: VarianceComponents::new(1.0, 1.0).expect("valid"),
            fixed_effects: FixedEffects::Intercept,
            kinship_ridge: DEFAULT_KINSHIP_RIDGE,
        }
    }

    pub fn experimentals(&self) -> Vec<usize> {
        self.indices_with(Role::Experimental)
    }

    pub fn checks(&self) -> Vec<usize> {
        self.indices_with(Role::Check)
    }

    fn indices_with(&self, role: Role) -> Vec<usize> {
        (0..self.genotypes.len())
            .filter(|&g| self.genotypes[g].role == role)
            .collect()
    }

    /// Required location count of experimental genotype `g`.
    pub fn presence_of(&self, g: usize) -> usize {
        self.genotypes[g].presence.unwrap_or(self.presence)
    }

    /// Replicates of check `g` at location `loc`.
    pub fn check_reps_at(&self, loc: usize, g: usize) -> usize {
        let id = &self.genotypes[g].id;
        self.locations[loc]
            .check_reps
            .as_ref()
            .and_then(|m| m.get(id))
            .or_else(|| self.check_reps.get(id))
            .copied()
            .unwrap_or(0)
    }

    /// Plots left for experimentals at `loc`.
    pub fn experimental_capacity(&self, loc: usize) -> usize {
        let checks: usize = self.checks().iter().map(|&g| self.check_reps_at(loc, g)).sum();
        self.locations[loc].n_plots().saturating_sub(checks)
    }

    /// Family index per genotype: named families numbered in order of first
    /// appearance, then one singleton family per unlabelled genotype.
    pub fn family_labels(&self) -> Vec<usize> {
        let mut names: Vec<&str> = Vec::new();
        let mut labels = vec![usize::MAX; self.genotypes.len()];
        for (g, gen) in self.genotypes.iter().enumerate() {
            if let Some(f) = &gen.family {
                labels[g] = match names.iter().position(|n| n == f) {
                    Some(i) => i,
                    None => {
                        names.push(f);
                        names.len() - 1
                    }
                };
            }
        }
        let mut next = names.len();
        for l in labels.iter_mut().filter(|l| **l == usize::MAX) {
            *l = next;
            next += 1;
        }
        labels
    }

    /// Family names in label order, unlabelled genotypes named by their id.
    pub fn family_names(&self) -> Vec<String> {
        let labels = self.family_labels();
        let n = labels.iter().map(|l| l + 1).max().unwrap_or(0);
        let mut names = vec![String::new(); n];
        for (g, &l) in labels.iter().enumerate() {
            if names[l].is_empty() {
                names[l] = self.genotypes[g]
                    .family
                    .clone()
                    .unwrap_or_else(|| self.genotypes[g].id.clone());
            }
        }
        names
    }

    /// Kinship over all genotypes, in spec order.
    pub fn kinship_matrix(&self) -> Result<KinshipMatrix> {
        match &self.kinship {
            KinshipSource::Identity => Ok(KinshipMatrix::identity(self.genotypes.len())),
            KinshipSource::FamilyBlocks { off_diag } => {
                KinshipMatrix::from_family_labels(&self.family_labels(), *off_diag)
            }
            KinshipSource::Explicit(k) => Ok(k.clone()),
        }
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    pub fn genotype_index(&self, id: &str) -> Option<usize> {
        self.genotypes.iter().position(|g| g.id == id)
    }

    /// Checks every invariant and reports all violations at once, each
    /// prefixed by its field path.
    pub fn validate(&self) -> Result<()> {
        let mut p: Vec<String> = Vec::new();
        if self.genotypes.is_empty() {
            p.push("genotypes: empty".into());
        }
        if self.locations.is_empty() {
            p.push("locations: empty".into());
        }
        let mut seen = BTreeMap::new();
        for (i, g) in self.genotypes.iter().enumerate() {
            if g.id.is_empty() {
                p.push(format!("genotypes[{i}].id: empty"));
            }
            if let Some(j) = seen.insert(g.id.as_str(), i) {
                p.push(format!("genotypes[{i}].id: duplicate of genotypes[{j}] ({})", g.id));
            }
            if let Some(k) = g.presence {
                if g.role == Role::Check {
                    p.push(format!("genotypes[{i}].presence: set on a check"));
                } else if k == 0 || k > self.locations.len() {
                    p.push(format!(
                        "genotypes[{i}].presence: {k} not in 1..={}",
                        self.locations.len()
                    ));
                }
            }
        }
        if !self.locations.is_empty() && (self.presence == 0 || self.presence > self.locations.len()) {
            p.push(format!(
                "presence: {} not in 1..={}",
                self.presence,
                self.locations.len()
            ));
        }
        let mut loc_ids = BTreeMap::new();
        for (i, l) in self.locations.iter().enumerate() {
            if let Some(j) = loc_ids.insert(l.id.as_str(), i) {
                p.push(format!("locations[{i}].id: duplicate of locations[{j}] ({})", l.id));
            }
            if l.n_plots() == 0 {
                p.push(format!("locations[{i}]: no plots"));
            }
        }
        self.validate_check_reps(&mut p);
        let ngen = self.genotypes.len();
        if let KinshipSource::Explicit(k) = &self.kinship {
            if k.n_genotypes() != ngen {
                p.push(format!(
                    "kinship.path: matrix is {0}x{0}, expected {ngen}x{ngen}",
                    k.n_genotypes()
                ));
            }
        }
        if let KinshipSource::FamilyBlocks { off_diag } = self.kinship {
            if !(0.0..1.0).contains(&off_diag) {
                p.push(format!("kinship.off_diag: {off_diag} outside [0, 1)"));
            }
        }
        if let Err(Error::InvalidSpec(v)) = self.residual.validate() {
            p.extend(v);
        }
        if !(self.kinship_ridge >= 0.0) {
            p.push(format!("kinship.ridge: {} must be >= 0", self.kinship_ridge));
        }
        if let FixedEffects::PerBlock(blocks) = &self.fixed_effects {
            for (i, l) in self.locations.iter().enumerate() {
                if blocks.len() != l.n_plots() {
                    p.push(format!(
                        "fixed_effects: block map has {} entries, locations[{i}] has {} plots",
                        blocks.len(),
                        l.n_plots()
                    ));
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(p))
        }
    }

    fn validate_check_reps(&self, p: &mut Vec<String>) {
        let is_check =
            |id: &str| self.genotype_index(id).map(|g| self.genotypes[g].role == Role::Check);
        for (id, &n) in &self.check_reps {
            match is_check(id) {
                None => p.push(format!("check_reps.{id}: unknown genotype")),
                Some(false) => p.push(format!("check_reps.{id}: not a check")),
                Some(true) if n == 0 => p.push(format!("check_reps.{id}: must be >= 1")),
                _ => {}
            }
        }
        for (i, l) in self.locations.iter().enumerate() {
            if let Some(m) = &l.check_reps {
                for id in m.keys() {
                    match is_check(id) {
                        None => p.push(format!("locations[{i}].check_reps.{id}: unknown genotype")),
                        Some(false) => p.push(format!("locations[{i}].check_reps.{id}: not a check")),
                        _ => {}
                    }
                }
            }
            let checks: usize = self.checks().iter().map(|&g| self.check_reps_at(i, g)).sum();
            if checks > l.n_plots() {
                p.push(format!(
                    "locations[{i}]: {checks} check plots exceed {} plots",
                    l.n_plots()
                ));
            }
        }
        if !self.locations.is_empty() {
            for g in self.checks() {
                if (0..self.locations.len()).all(|l| self.check_reps_at(l, g) == 0) {
                    p.push(format!(
                        "check_reps.{}: check has no replicates at any location",
                        self.genotypes[g].id
                    ));
                }
            }
        }
    }
}
