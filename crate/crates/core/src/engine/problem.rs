use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use super::Permutation;
use crate::Result;

/// A minimisation problem over permutations of `0..dimension()`.
///
/// Constraints are handled the hard way: the engine only ever moves by
/// interchanges that [`step_feasible`](Self::step_feasible) approves, starting
/// from permutations produced by [`random_initial`](Self::random_initial), so
/// every evaluated permutation is feasible.
pub trait PermutationProblem {
    fn dimension(&self) -> usize;

    /// Objective value, lower is better. Must be deterministic.
    fn evaluate(&self, perm: &Permutation) -> Result<f64>;

    /// Whether interchanging positions `i` and `j` of the feasible `perm`
    /// keeps it feasible.
    fn step_feasible(&self, _perm: &Permutation, _i: usize, _j: usize) -> bool {
        true
    }

    /// Full feasibility predicate.
    fn is_feasible(&self, _perm: &Permutation) -> bool {
        true
    }

    /// A random feasible permutation. The default is uniform over all
    /// permutations, which suits unconstrained problems.
    fn random_initial(&self, rng: &mut dyn RngCore) -> Result<Permutation> {
        let mut v: Vec<usize> = (0..self.dimension()).collect();
        v.shuffle(rng);
        Permutation::new(v)
    }
}

impl<P: PermutationProblem + ?Sized> PermutationProblem for &P {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn evaluate(&self, perm: &Permutation) -> Result<f64> {
        (**self).evaluate(perm)
    }

    fn step_feasible(&self, perm: &Permutation, i: usize, j: usize) -> bool {
        (**self).step_feasible(perm, i, j)
    }

    fn is_feasible(&self, perm: &Permutation) -> bool {
        (**self).is_feasible(perm)
    }

    fn random_initial(&self, rng: &mut dyn RngCore) -> Result<Permutation> {
        (**self).random_initial(rng)
    }
}

/// Evaluates a batch of candidates. Implementations may run the batch in
/// parallel; results are returned in input order.
pub trait Executor {
    fn evaluate_batch<P>(&self, problem: &P, perms: &[Permutation]) -> Vec<Result<f64>>
    where
        P: PermutationProblem + Sync + ?Sized;
}

/// Evaluates one candidate after the other on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn evaluate_batch<P>(&self, problem: &P, perms: &[Permutation]) -> Vec<Result<f64>>
    where
        P: PermutationProblem + Sync + ?Sized,
    {
        perms.iter().map(|p| problem.evaluate(p)).collect()
    }
}

/// Source of elapsed wall time; the core has no clock of its own.
pub trait Clock {
    fn elapsed_seconds(&self) -> f64;
}

/// Reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_seconds(&self) -> f64 {
        0.0
    }
}
