//! Exhaustive enumeration of randomized executions.
//!
//! A closure that draws all of its randomness from a [`BranchSampler`] can be
//! run once per possible execution path by feeding it an [`ExhaustiveTape`]:
//! the tape replays a recorded prefix of choices, extends it with the first
//! admissible branch, and after each run advances like an odometer to the next
//! unexplored path. The weight of a path is the product of the normalized
//! weights of the branches it took.

use crate::sampling::{BranchSampler, SampleError, BRANCH_EPS};

#[derive(Debug, Clone)]
struct Step {
    choice: usize,
    weights: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct ExhaustiveTape {
    steps: Vec<Step>,
    cursor: usize,
    weight: f64,
}

impl ExhaustiveTape {
    pub fn new() -> Self {
        Self {
            steps: Vec::new(),
            cursor: 0,
            weight: 1.0,
        }
    }

    fn begin(&mut self) {
        self.cursor = 0;
        self.weight = 1.0;
    }

    /// Moves to the next path; returns `false` once every path was visited.
    fn advance(&mut self) -> bool {
        // choices past the cursor were never consumed by the last run
        self.steps.truncate(self.cursor);
        while let Some(step) = self.steps.last_mut() {
            let next =
                (step.choice + 1..step.weights.len()).find(|&i| step.weights[i] > BRANCH_EPS);
            match next {
                Some(i) => {
                    step.choice = i;
                    return true;
                }
                None => {
                    self.steps.pop();
                }
            }
        }
        false
    }

    /// Probability weight of the path taken by the current run.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Number of branch points consumed by the current run.
    pub fn depth(&self) -> usize {
        self.cursor
    }
}

impl BranchSampler for ExhaustiveTape {
    fn select(&mut self, weights: &[f64]) -> Result<usize, SampleError> {
        let total: f64 = weights.iter().sum();
        if total <= BRANCH_EPS {
            return Err(SampleError::NoBranches);
        }
        let choice = if let Some(step) = self.steps.get(self.cursor) {
            debug_assert_eq!(
                step.weights.len(),
                weights.len(),
                "replayed branch point changed arity"
            );
            step.choice
        } else {
            let first = weights
                .iter()
                .position(|&w| w > BRANCH_EPS)
                .ok_or(SampleError::NoBranches)?;
            self.steps.push(Step {
                choice: first,
                weights: weights.to_vec(),
            });
            first
        };
        if weights[choice] <= BRANCH_EPS {
            return Err(SampleError::ZeroProbabilityBranch { index: choice });
        }
        self.cursor += 1;
        self.weight *= weights[choice] / total;
        Ok(choice)
    }
}

/// Runs `body` once per execution path, passing the tape to draw from, and
/// hands each result together with its path weight to `visit`.
///
/// `budget` caps the number of paths; exceeding it is reported as an error.
pub fn for_each_path<T, E>(
    budget: usize,
    mut body: impl FnMut(&mut ExhaustiveTape) -> Result<T, E>,
    mut visit: impl FnMut(f64, T),
) -> Result<usize, EnumerateError<E>> {
    let mut tape = ExhaustiveTape::new();
    let mut paths = 0usize;
    loop {
        if paths == budget {
            return Err(EnumerateError::BudgetExceeded { budget });
        }
        tape.begin();
        let out = body(&mut tape).map_err(EnumerateError::Body)?;
        paths += 1;
        visit(tape.weight(), out);
        if !tape.advance() {
            return Ok(paths);
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnumerateError<E> {
    #[error("enumeration exceeded its budget of {budget} paths")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Body(E),
}
