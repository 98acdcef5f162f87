//! Optimal field-trial designs by permutation differential evolution.
//!
//! The crate is split along the lines of the problem:
//!
//! * [`model`] builds the linear mixed model matrices (kinship, AR(1)×AR(1)
//!   residual, fixed-effect projection) and scores a design by the prediction
//!   error variance (PEV) of the random genetic effects.
//! * [`engine`] is a differential evolution over permutations: Hamming
//!   distance as the difference, interchanges as the step, elitist selection,
//!   restarts.
//! * [`design`] turns a [`design::TrialSpec`] into permutation problems for
//!   the between-location allocation and the within-location layout, plus the
//!   diagnostics used to judge a design.
//! * [`oracle`] holds brute-force reference paths used for validation.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration files and
//! threading live in the companion `fieldtrial` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod design;
pub mod engine;
mod error;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
