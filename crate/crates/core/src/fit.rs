//! Common result envelope and the multi-restart driver shared by every fitting routine.

use std::time::{Duration, Instant};

use crate::cempca::EmbeddingBundle;
use crate::error::{Error, Result};
use crate::mixture::{MixtureParams, Partition};
use crate::par::{derive_seed, Execution};

/// Outcome of the best restart.
///
/// `objective_trace` always holds the quantity being minimized, one value for the initial
/// state and one per iteration: negative log-likelihood for EM and CEM, within-cluster sum
/// of squares for K-means, `‖X - ZSQᵀ‖²` for reduced K-means and the joint objective for
/// CEM-PCA.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub partition: Partition,
    pub bundle: Option<EmbeddingBundle>,
    pub params: MixtureParams,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Seed of the winning restart.
    pub seed: u64,
    pub restart_seeds: Vec<u64>,
    /// Final objective of each restart; `None` when the restart failed.
    pub restart_objectives: Vec<Option<f64>>,
    pub wall_time: Duration,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn failed_restarts(&self) -> usize {
        self.restart_objectives
            .iter()
            .filter(|o| o.is_none())
            .count()
    }

    /// Equality of everything except timing.
    pub fn same_outcome(&self, other: &FitResult) -> bool {
        self.partition == other.partition
            && self.bundle == other.bundle
            && self.params == other.params
            && self.objective_trace == other.objective_trace
            && self.iterations == other.iterations
            && self.seed == other.seed
            && self.restart_seeds == other.restart_seeds
            && self.restart_objectives == other.restart_objectives
    }
}

/// One restart's result before selection.
#[derive(Debug, Clone)]
pub(crate) struct RunOutcome {
    pub partition: Partition,
    pub params: MixtureParams,
    pub bundle: Option<EmbeddingBundle>,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

impl RunOutcome {
    fn objective(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Runs `restarts` independent fits and keeps the lowest final objective (ties to the
/// lowest restart index).
pub(crate) fn best_of_restarts<F>(
    restarts: usize,
    seed: u64,
    execution: Execution,
    run: F,
) -> Result<FitResult>
where
    F: Fn(usize, u64) -> Result<RunOutcome> + Sync + Send,
{
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let start = Instant::now();
    let seeds: Vec<u64> = (0..restarts as u64).map(|r| derive_seed(seed, r)).collect();
    let outcomes = execution.map_indices(restarts, |r| run(r, seeds[r]));

    let restart_objectives: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().map(RunOutcome::objective))
        .collect();
    let mut best: Option<usize> = None;
    for (r, o) in restart_objectives.iter().enumerate() {
        if let Some(v) = o {
            if v.is_finite() && best.is_none_or(|b| *v < restart_objectives[b].unwrap()) {
                best = Some(r);
            }
        }
    }
    let Some(best) = best else {
        let last = outcomes
            .into_iter()
            .rev()
            .find_map(|o| o.err())
            .unwrap_or(Error::Numerical { row: 0 });
        return Err(Error::AllRestartsFailed {
            restarts,
            last: Box::new(last),
        });
    };
    let winner = outcomes.into_iter().nth(best).unwrap().unwrap();
    Ok(FitResult {
        partition: winner.partition,
        bundle: winner.bundle,
        params: winner.params,
        objective_trace: winner.trace,
        iterations: winner.iterations,
        seed: seeds[best],
        restart_seeds: seeds,
        restart_objectives,
        wall_time: start.elapsed(),
    })
}
