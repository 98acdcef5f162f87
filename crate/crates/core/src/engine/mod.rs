//! Differential evolution over permutations.

mod evolve;
mod permutation;
mod problem;
mod strategy;

pub use evolve::{
    evolve, evolve_with, restart_rng, ConvergenceTrace, EngineConfig, EvolveOutcome, Progress,
    ProgressSink, Quiet, start_rng,
};
pub use permutation::{hamming, interchange, interchange_path, Permutation};
pub use problem::{Clock, Executor, NoClock, PermutationProblem, Serial};
pub use strategy::{
    best_index, build_trial, de_step, propose, sample_distinct, sample_participants, select,
    step_count, Individual, Participants, Strategy,
};
