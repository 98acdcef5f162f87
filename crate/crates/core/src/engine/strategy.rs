use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::{hamming, Permutation, PermutationProblem};
use crate::{Error, Result};

/// Rule for building the base point and the difference from sampled
/// population members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// `ω = ξ₃ ⊕ λ·Δ(ξ₁, ξ₂)` with three random members.
    Rand3,
    /// `ω = best ⊕ λ·Δ(ξ₁, ξ₂)`.
    Rand2Best,
    /// `ω = ξ₁ ⊕ λ·Δ(ξ₂, best)` with `f(ξ₁) ≤ f(ξ₂)`.
    Dir2Best,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Rand3, Strategy::Rand2Best, Strategy::Dir2Best];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Rand3 => "rand3",
            Strategy::Rand2Best => "rand2best",
            Strategy::Dir2Best => "dir2best",
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (rand3, rand2best, dir2best)")))
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// A permutation and its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub perm: Permutation,
    pub fitness: f64,
}

/// Population indices chosen for one trial: the trial starts at `base` and
/// takes as many interchanges as the distance between `from` and `to`
/// (scaled by λ) prescribes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Participants {
    pub base: usize,
    pub from: usize,
    pub to: usize,
}

/// Index of the first member with the lowest fitness.
pub fn best_index(population: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in population.iter().enumerate().skip(1) {
        if ind.fitness < population[best].fitness {
            best = i;
        }
    }
    best
}

/// `k` distinct indices from `0..n` avoiding `exclude`, by partial
/// Fisher–Yates over the remaining candidates.
pub fn sample_distinct(n: usize, exclude: &[usize], k: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
    let mut pool: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
    if pool.len() < k {
        return Err(Error::Config(format!(
            "population of {n} too small to sample {k} members besides {exclude:?}"
        )));
    }
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(pool)
}

/// Chooses the members for the trial of `target` under `strategy`. `best` is
/// the current best index.
pub fn sample_participants(
    strategy: Strategy,
    population: &[Individual],
    target: usize,
    best: usize,
    rng: &mut dyn RngCore,
) -> Result<Participants> {
    let np = population.len();
    if np < 4 {
        return Err(Error::Config(format!("population size {np} < 4")));
    }
    Ok(match strategy {
        Strategy::Rand3 => {
            let s = sample_distinct(np, &[target], 3, rng)?;
            Participants {
                base: s[2],
                from: s[0],
                to: s[1],
            }
        }
        Strategy::Rand2Best => {
            let s = sample_distinct(np, &[target, best], 2, rng)?;
            Participants {
                base: best,
                from: s[0],
                to: s[1],
            }
        }
        Strategy::Dir2Best => {
            let s = sample_distinct(np, &[target, best], 2, rng)?;
            let (mut a, mut b) = (s[0], s[1]);
            if population[b].fitness < population[a].fitness {
                core::mem::swap(&mut a, &mut b);
            }
            Participants {
                base: a,
                from: b,
                to: best,
            }
        }
    })
}

/// Number of interchanges for a measured distance: `round(λ·d)`, at least
/// one whenever `d > 0`.
pub fn step_count(lambda: f64, distance: usize) -> usize {
    if distance == 0 {
        return 0;
    }
    (libm::round(lambda * distance as f64) as usize).max(1)
}

/// Applies `n_steps` random feasible interchanges to `base`. Each step
/// resamples rejected pairs up to `100·D` times.
pub fn de_step<P>(base: &Permutation, n_steps: usize, problem: &P, rng: &mut dyn RngCore) -> Result<Permutation>
where
    P: PermutationProblem + ?Sized,
{
    let d = base.len();
    let mut out = base.clone();
    if n_steps == 0 {
        return Ok(out);
    }
    if d < 2 {
        return Err(Error::InvalidArgument(format!("cannot interchange in dimension {d}")));
    }
    let budget = 100 * d;
    let mut rejected = 0;
    for _ in 0..n_steps {
        let mut attempts = 0;
        loop {
            let i = rng.random_range(0..d);
            let mut j = rng.random_range(0..d - 1);
            if j >= i {
                j += 1;
            }
            if problem.step_feasible(&out, i, j) {
                out.swap(i, j);
                break;
            }
            rejected += 1;
            attempts += 1;
            if attempts >= budget {
                return Err(Error::StepStalled { rejected });
            }
        }
    }
    Ok(out)
}

/// Builds the unevaluated trial permutation of a set of participants.
pub fn build_trial<P>(
    participants: &Participants,
    population: &[Individual],
    lambda: f64,
    problem: &P,
    rng: &mut dyn RngCore,
) -> Result<Permutation>
where
    P: PermutationProblem + ?Sized,
{
    let distance = hamming(&population[participants.from].perm, &population[participants.to].perm)?;
    de_step(
        &population[participants.base].perm,
        step_count(lambda, distance),
        problem,
        rng,
    )
}

/// Samples, steps and evaluates one trial for `target`.
pub fn propose<P>(
    strategy: Strategy,
    population: &[Individual],
    target: usize,
    lambda: f64,
    problem: &P,
    rng: &mut dyn RngCore,
) -> Result<Individual>
where
    P: PermutationProblem + ?Sized,
{
    let best = best_index(population);
    let participants = sample_participants(strategy, population, target, best, rng)?;
    let perm = build_trial(&participants, population, lambda, problem, rng)?;
    let fitness = problem.evaluate(&perm)?;
    Ok(Individual { perm, fitness })
}

/// Elitist selection: the trial wins ties.
pub fn select(trial: Individual, incumbent: Individual) -> Individual {
    if trial.fitness <= incumbent.fitness {
        trial
    } else {
        incumbent
    }
}
