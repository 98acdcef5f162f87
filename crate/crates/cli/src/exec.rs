use std::time::Instant;

use fieldtrial_core::engine::{Clock, Executor, Permutation, PermutationProblem, Serial};
use fieldtrial_core::Result;
use rayon::prelude::*;

/// Evaluates each generation's trials on a rayon pool. Trials are built
/// serially by the engine, so results do not depend on the thread count.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> std::result::Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool })
    }
}

impl Executor for RayonExecutor {
    fn evaluate_batch<P>(&self, problem: &P, perms: &[Permutation]) -> Vec<Result<f64>>
    where
        P: PermutationProblem + Sync + ?Sized,
    {
        self.pool
            .install(|| perms.par_iter().map(|p| problem.evaluate(p)).collect())
    }
}

/// Serial for one thread, a pool otherwise.
pub enum AnyExecutor {
    Serial,
    Pool(RayonExecutor),
}

impl AnyExecutor {
    pub fn with_threads(threads: usize) -> Self {
        if threads <= 1 {
            return Self::Serial;
        }
        match RayonExecutor::new(threads) {
            Ok(p) => Self::Pool(p),
            Err(_) => Self::Serial,
        }
    }
}

impl Executor for AnyExecutor {
    fn evaluate_batch<P>(&self, problem: &P, perms: &[Permutation]) -> Vec<Result<f64>>
    where
        P: PermutationProblem + Sync + ?Sized,
    {
        match self {
            Self::Serial => Serial.evaluate_batch(problem, perms),
            Self::Pool(p) => p.evaluate_batch(problem, perms),
        }
    }
}

/// Wall time since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
