//! Sources of randomness for branch selection.
//!
//! Every random decision in the simulator, whether a Born-rule measurement
//! outcome or a classical coin of one of the parties, goes through
//! [`BranchSampler`]. A seeded RNG samples a single execution; an
//! [`ExhaustiveTape`](crate::enumerate::ExhaustiveTape) walks every execution.

use rand::Rng;
use thiserror::Error;

/// Probabilities below this are treated as impossible branches.
pub const BRANCH_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("branch {index} has zero probability and cannot be replayed")]
    ZeroProbabilityBranch { index: usize },
    #[error("no branch has positive weight")]
    NoBranches,
    #[error("forced branch {index} out of range for {arity} branches")]
    OutOfRange { index: usize, arity: usize },
}

pub trait BranchSampler {
    /// Picks an index with probability proportional to `weights[i]`.
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError>;

    /// Uniform choice in `0..n`.
    fn uniform(&mut self, n: usize) -> usize {
        let w = vec![1.0 / n as f64; n];
        self.select(&w).expect("uniform weights are positive")
    }

    fn bit(&mut self) -> u8 {
        self.uniform(2) as u8
    }
}

impl<T: BranchSampler + ?Sized> BranchSampler for &mut T {
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        (**self).select(weights)
    }

    fn uniform(&mut self, n: usize) -> usize {
        (**self).uniform(n)
    }
}

impl<T: BranchSampler + ?Sized> BranchSampler for Box<T> {
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        (**self).select(weights)
    }

    fn uniform(&mut self, n: usize) -> usize {
        (**self).uniform(n)
    }
}

/// Samples branches from an RNG.
#[derive(Debug, Clone)]
pub struct RngSampler<R>(pub R);

impl<R: Rng> BranchSampler for RngSampler<R> {
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        let total: f64 = weights.iter().sum();
        if total <= BRANCH_EPS {
            return Err(SampleError::NoBranches);
        }
        let u = self.0.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= BRANCH_EPS {
                continue;
            }
            acc += w;
            last = Some(i);
            if u < acc {
                return Ok(i);
            }
        }
        // rounding can leave u a hair above the accumulated total
        last.ok_or(SampleError::NoBranches)
    }

    fn uniform(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

/// Always picks the same branch; used for deterministic replay.
#[derive(Debug, Clone, Copy)]
pub struct Forced(pub usize);

impl BranchSampler for Forced {
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        match weights.get(self.0) {
            None => Err(SampleError::OutOfRange {
                index: self.0,
                arity: weights.len(),
            }),
            Some(&w) if w <= BRANCH_EPS => {
                Err(SampleError::ZeroProbabilityBranch { index: self.0 })
            }
            Some(_) => Ok(self.0),
        }
    }
}
