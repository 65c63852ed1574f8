use serde::{Deserialize, Serialize};

use cempca::metrics::{accuracy, ari, nmi};
use cempca::FitResult;

use crate::config::ResolvedConfig;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

impl Metrics {
    pub fn compute(truth: &[usize], pred: &[usize]) -> Result<Self> {
        Ok(Self {
            acc: accuracy(truth, pred)?,
            nmi: nmi(truth, pred)?,
            ari: ari(truth, pred)?,
        })
    }
}

/// Everything needed to report and replay one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub config: ResolvedConfig,
    /// Base seed; restart `r` runs with a seed derived from it and `r`.
    pub seed: u64,
    /// Seed of the restart that was kept.
    pub best_restart_seed: u64,
    /// Only present when ground-truth labels were supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Metrics>,
    pub iterations: usize,
    /// Seconds.
    pub wall_time: f64,
    pub objective_final: f64,
    pub objective_trace: Vec<f64>,
    pub restart_objectives: Vec<Option<f64>>,
    pub assignments: Vec<usize>,
}

impl RunRecord {
    pub fn new(
        dataset: &str,
        n: usize,
        d: usize,
        config: &ResolvedConfig,
        fit: &FitResult,
        truth: Option<&[usize]>,
    ) -> Result<Self> {
        Ok(Self {
            method: config.method.name().to_owned(),
            dataset: dataset.to_owned(),
            n,
            d,
            config: config.clone(),
            seed: config.seed,
            best_restart_seed: fit.seed,
            metrics: truth
                .map(|t| Metrics::compute(t, &fit.partition.assignments))
                .transpose()?,
            iterations: fit.iterations,
            wall_time: fit.wall_time.as_secs_f64(),
            objective_final: fit.objective(),
            objective_trace: fit.objective_trace.clone(),
            restart_objectives: fit.restart_objectives.clone(),
            assignments: fit.partition.assignments.clone(),
        })
    }
}
