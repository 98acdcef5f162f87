use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::strategy::{best_index, build_trial, sample_participants, select, Individual, Strategy};
use super::{Clock, Executor, NoClock, Permutation, PermutationProblem, Serial};
use crate::{Error, Result};

/// Attempts at drawing one feasible initial individual.
const INITIAL_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Population size NP.
    pub np: usize,
    /// Locality factor λ: interchanges per unit of measured distance.
    pub lambda: f64,
    pub strategy: Strategy,
    /// Evaluations per restart, initial population included.
    pub max_evals: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            np: 25,
            lambda: 0.3,
            strategy: Strategy::Rand3,
            max_evals: 2000,
            restarts: 30,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.np < 4 {
            return Err(Error::Config(format!("np = {} < 4", self.np)));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda = {} outside (0, 1]", self.lambda)));
        }
        if self.max_evals < self.np {
            return Err(Error::Config(format!(
                "max_evals = {} < np = {}",
                self.max_evals, self.np
            )));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts = 0".into()));
        }
        Ok(())
    }
}

/// Random stream of restart `restart`: ChaCha8 keyed by the seed, with the
/// restart index as stream id, so each restart can be replayed alone.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Random stream reserved for drawing start designs, disjoint from every
/// restart stream.
pub fn start_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// One progress report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub restart: usize,
    /// Evaluations so far, over all restarts.
    pub nfe: u64,
    /// Best objective of the current restart.
    pub best_objective: f64,
    pub elapsed_seconds: f64,
}

pub trait ProgressSink {
    fn record(&mut self, progress: &Progress);
}

impl<F: FnMut(&Progress)> ProgressSink for F {
    fn record(&mut self, progress: &Progress) {
        self(progress)
    }
}

/// Discards progress.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quiet;

impl ProgressSink for Quiet {
    fn record(&mut self, _: &Progress) {}
}

/// One record per generation of every restart.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<Progress>,
}

impl ConvergenceTrace {
    /// Best objective over all records.
    pub fn best(&self) -> Option<f64> {
        self.records.iter().map(|r| r.best_objective).reduce(f64::min)
    }

    pub fn restart(&self, restart: usize) -> impl Iterator<Item = &Progress> {
        self.records.iter().filter(move |r| r.restart == restart)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOutcome {
    pub best: Individual,
    pub trace: ConvergenceTrace,
    pub evaluations: u64,
}

/// Serial evolution without timing.
pub fn evolve<P, S>(problem: &P, cfg: &EngineConfig, sink: &mut S) -> Result<EvolveOutcome>
where
    P: PermutationProblem + Sync + ?Sized,
    S: ProgressSink + ?Sized,
{
    evolve_with(problem, cfg, &Serial, &NoClock, sink)
}

/// Differential evolution over permutations.
///
/// Each generation builds one trial per member on the calling thread (all
/// randomness is drawn here, in member order), evaluates the batch through
/// `executor`, then applies elitist selection against the generation-start
/// population. The outcome therefore does not depend on how the executor
/// schedules evaluations. A final partial generation spends whatever budget
/// is left.
pub fn evolve_with<P, E, C, S>(
    problem: &P,
    cfg: &EngineConfig,
    executor: &E,
    clock: &C,
    sink: &mut S,
) -> Result<EvolveOutcome>
where
    P: PermutationProblem + Sync + ?Sized,
    E: Executor + ?Sized,
    C: Clock + ?Sized,
    S: ProgressSink + ?Sized,
{
    cfg.validate()?;
    let mut trace = ConvergenceTrace::default();
    let mut nfe: u64 = 0;
    let mut overall: Option<Individual> = None;

    for restart in 0..cfg.restarts {
        let mut rng = restart_rng(cfg.seed, restart);

        let mut perms = Vec::with_capacity(cfg.np);
        for _ in 0..cfg.np {
            perms.push(initial(problem, &mut rng)?);
        }
        let fits = executor.evaluate_batch(problem, &perms);
        let mut population = perms
            .into_iter()
            .zip(fits)
            .map(|(perm, f)| f.map(|fitness| Individual { perm, fitness }))
            .collect::<Result<Vec<_>>>()?;
        nfe += cfg.np as u64;
        let mut spent = cfg.np;
        report(&population, restart, nfe, clock, sink, &mut trace);

        while spent < cfg.max_evals {
            let batch = (cfg.max_evals - spent).min(cfg.np);
            let best = best_index(&population);
            let mut trials = Vec::with_capacity(batch);
            for target in 0..batch {
                let part = sample_participants(cfg.strategy, &population, target, best, &mut rng)?;
                let perm = build_trial(&part, &population, cfg.lambda, problem, &mut rng)?;
                debug_assert!(problem.is_feasible(&perm), "infeasible trial");
                trials.push(perm);
            }
            let fits = executor.evaluate_batch(problem, &trials);
            for (target, (perm, fit)) in trials.into_iter().zip(fits).enumerate() {
                let trial = Individual { perm, fitness: fit? };
                let incumbent = core::mem::replace(
                    &mut population[target],
                    Individual {
                        perm: Permutation::identity(0),
                        fitness: f64::NAN,
                    },
                );
                population[target] = select(trial, incumbent);
            }
            nfe += batch as u64;
            spent += batch;
            report(&population, restart, nfe, clock, sink, &mut trace);
        }

        let best = &population[best_index(&population)];
        if overall.as_ref().is_none_or(|o| best.fitness < o.fitness) {
            overall = Some(best.clone());
        }
    }

    Ok(EvolveOutcome {
        best: overall.expect("at least one restart"),
        trace,
        evaluations: nfe,
    })
}

fn initial<P>(problem: &P, rng: &mut ChaCha8Rng) -> Result<Permutation>
where
    P: PermutationProblem + ?Sized,
{
    for _ in 0..INITIAL_ATTEMPTS {
        if let Ok(p) = problem.random_initial(rng) {
            if p.len() == problem.dimension() && problem.is_feasible(&p) {
                return Ok(p);
            }
        }
    }
    Err(Error::InfeasibleStart {
        attempts: INITIAL_ATTEMPTS,
    })
}

fn report<C, S>(
    population: &[Individual],
    restart: usize,
    nfe: u64,
    clock: &C,
    sink: &mut S,
    trace: &mut ConvergenceTrace,
) where
    C: Clock + ?Sized,
    S: ProgressSink + ?Sized,
{
    let progress = Progress {
        restart,
        nfe,
        best_objective: population[best_index(population)].fitness,
        elapsed_seconds: clock.elapsed_seconds(),
    };
    sink.record(&progress);
    trace.records.push(progress);
}
