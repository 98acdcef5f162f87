//! Trial specifications and the two design phases built from them.
//!
//! The between-location phase permutes genotype copies over a fixed set of
//! experimental slots per location. The within-location phase permutes the
//! entries of one field (experimentals plus check replicates) over its plots.

mod between;
mod diagnostics;
mod spec;
mod within;

pub use between::{random_start_between, BetweenAssignment, BetweenProblem, SlotModel};
pub use diagnostics::{
    check_spread_summary, family_spread, same_family_adjacencies, spread_imbalance, CheckSpread,
    FamilySpreadTable,
};
pub use spec::{FixedEffects, Genotype, KinshipSource, Location, LocationSize, Role, TrialSpec};
pub use within::{WithinPlacement, WithinProblem, WithinStart};
