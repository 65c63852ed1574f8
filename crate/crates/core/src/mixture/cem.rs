use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kmeans::{check_sizes, initial_partition, lloyd_from, KmeansInit};
use super::{
    log_weighted_densities, m_step_floored, relative_change, row_argmax, CovarianceFloor,
    CovarianceModel, MixtureOptions, MixtureParams, Partition,
};
use crate::error::{Error, Result};
use crate::fit::{best_of_restarts, FitResult, RunOutcome};
use crate::linalg::Matrix;

/// MAP assignment `argmax_k log π_k + log φ_k(x_i)`, ties to the lowest index.
pub fn classify(x: &Matrix, params: &MixtureParams) -> Result<Partition> {
    let logd = log_weighted_densities(x, params)?;
    Ok(Partition {
        assignments: row_argmax(&logd),
        g: params.g(),
    })
}

/// What a C-step does when it would leave a cluster without members.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum EmptyPolicy {
    /// Move the point with the lowest log-density under its own component into it.
    Reseed,
    /// Discard the new partition and keep the previous one.
    KeepPrevious,
}

#[derive(Debug, Clone)]
pub(crate) struct CemRun {
    pub partition: Partition,
    pub params: MixtureParams,
    /// Negative complete-data log-likelihood, initial state first.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Runs CEM with one K-means-initialized start per restart and keeps the best
/// complete-data likelihood.
pub fn cem(x: &Matrix, g: usize, opts: &MixtureOptions) -> Result<FitResult> {
    check_sizes(x, g)?;
    let floor = CovarianceFloor::for_data(x);
    best_of_restarts(opts.restarts, opts.seed, opts.execution, |_, seed| {
        let init = kmeans_start(x, g, seed, opts.max_iter)?;
        let run = cem_run(
            x,
            &init,
            opts.model,
            opts.max_iter,
            opts.tol,
            opts.fixed_uniform_weights,
            &floor,
            EmptyPolicy::Reseed,
        )?;
        Ok(run.into_outcome())
    })
}

/// Single CEM run from a given partition (no restarts).
pub fn cem_from_partition(
    x: &Matrix,
    init: &Partition,
    opts: &MixtureOptions,
) -> Result<FitResult> {
    check_sizes(x, init.g)?;
    let floor = CovarianceFloor::for_data(x);
    best_of_restarts(1, opts.seed, opts.execution, |_, _| {
        cem_run(
            x,
            init,
            opts.model,
            opts.max_iter,
            opts.tol,
            opts.fixed_uniform_weights,
            &floor,
            EmptyPolicy::Reseed,
        )
        .map(CemRun::into_outcome)
    })
}

impl CemRun {
    fn into_outcome(self) -> RunOutcome {
        RunOutcome {
            partition: self.partition,
            params: self.params,
            bundle: None,
            trace: self.trace,
            iterations: self.iterations,
        }
    }
}

/// K-means partition used to start EM and CEM.
pub(crate) fn kmeans_start(x: &Matrix, g: usize, seed: u64, max_iter: usize) -> Result<Partition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = initial_partition(x, g, KmeansInit::PlusPlus, &mut rng);
    Ok(lloyd_from(x, &init, max_iter, 0.0)?.0)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn cem_run(
    x: &Matrix,
    init: &Partition,
    model: CovarianceModel,
    max_iter: usize,
    tol: f64,
    uniform_weights: bool,
    floor: &CovarianceFloor,
    policy: EmptyPolicy,
) -> Result<CemRun> {
    if init.n() != x.nrows() {
        return Err(Error::invalid("initial partition does not match data"));
    }
    let mut partition = init.clone();
    let mut params = m_step_floored(x, &partition.one_hot(), model, floor, uniform_weights)?;
    let mut trace = vec![-super::complete_log_likelihood(x, &partition, &params)?];
    let mut iterations = 0;
    while iterations < max_iter {
        let (next, next_params, value) = cem_step(
            x,
            &partition,
            &params,
            model,
            floor,
            uniform_weights,
            policy,
        )?;
        iterations += 1;
        let prev = *trace.last().unwrap();
        trace.push(value);
        let unchanged = next == partition;
        partition = next;
        params = next_params;
        if unchanged || relative_change(prev, value) < tol {
            break;
        }
    }
    Ok(CemRun {
        partition,
        params,
        trace,
        iterations,
    })
}

/// One E → C → M cycle. Returns the new partition, parameters and the negative
/// complete-data log-likelihood they reach.
pub(crate) fn cem_step(
    x: &Matrix,
    partition: &Partition,
    params: &MixtureParams,
    model: CovarianceModel,
    floor: &CovarianceFloor,
    uniform_weights: bool,
    policy: EmptyPolicy,
) -> Result<(Partition, MixtureParams, f64)> {
    let logd = log_weighted_densities(x, params)?;
    let mut next = Partition {
        assignments: row_argmax(&logd),
        g: params.g(),
    };
    if next.first_empty().is_some() {
        match policy {
            EmptyPolicy::KeepPrevious => next = partition.clone(),
            EmptyPolicy::Reseed => {
                while let Some(k) = next.first_empty() {
                    let counts = next.counts();
                    let worst = (0..x.nrows())
                        .filter(|&i| counts[next.assignments[i]] > 1)
                        .min_by(|&a, &b| {
                            logd[(a, next.assignments[a])]
                                .total_cmp(&logd[(b, next.assignments[b])])
                        })
                        .expect("n >= g leaves a cluster with two members");
                    next.assignments[worst] = k;
                }
            }
        }
    }
    let next_params = m_step_floored(x, &next.one_hot(), model, floor, uniform_weights)?;
    let value = -super::complete_log_likelihood(x, &next, &next_params)?;
    Ok((next, next_params, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ari;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub(crate) fn blobs(
        centers: &[[f64; 2]],
        per: usize,
        sd: f64,
        seed: u64,
    ) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = centers.len() * per;
        let mut labels = Vec::with_capacity(n);
        let x = Matrix::from_fn(n, 2, |i, j| {
            centers[i / per][j] + sd * rng.sample::<f64, _>(StandardNormal)
        });
        for i in 0..n {
            labels.push(i / per);
        }
        (x, labels)
    }

    fn opts() -> MixtureOptions {
        MixtureOptions {
            restarts: 4,
            seed: 11,
            ..MixtureOptions::default()
        }
    }

    #[test]
    fn separated_blobs_are_recovered_quickly() {
        let (x, truth) = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]], 40, 1.0, 1);
        let fit = cem(&x, 3, &opts()).unwrap();
        let pred = Partition::new(fit.partition.assignments.clone(), 3).unwrap();
        assert_eq!(ari(&truth, &pred.assignments).unwrap(), 1.0);
        assert!(fit.iterations <= 20);
    }

    #[test]
    fn converged_partition_is_a_fixed_point() {
        let (x, truth) = blobs(&[[0.0, 0.0], [20.0, 0.0]], 30, 1.0, 2);
        let init = Partition::new(truth, 2).unwrap();
        let fit = cem_from_partition(&x, &init, &opts()).unwrap();
        assert_eq!(fit.partition, init);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn tied_uniform_classification_is_nearest_centroid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = Matrix::from_fn(50, 3, |_, _| rng.random::<f64>() * 6.0);
            let means = Matrix::from_fn(4, 3, |_, _| rng.random::<f64>() * 6.0);
            let var = 0.1 + rng.random::<f64>();
            let params = MixtureParams::new(
                vec![0.25; 4],
                means.clone(),
                vec![Matrix::identity(3, 3) * var; 4],
                CovarianceModel::SphericalTied,
            )
            .unwrap();
            let got = classify(&x, &params).unwrap();
            assert_eq!(got.assignments, super::super::kmeans::nearest(&x, &means));
        }
    }

    #[test]
    fn reseeding_fills_emptied_clusters() {
        // Three identical points cannot support three distinct components.
        let x = Matrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, 5.0]);
        let init = Partition::new(vec![0, 1, 2, 2], 3).unwrap();
        let fit = cem_from_partition(&x, &init, &opts()).unwrap();
        assert!(fit.partition.first_empty().is_none());
    }

    #[test]
    fn classify_agrees_with_e_then_c_step() {
        let (x, truth) = blobs(&[[0.0, 0.0], [3.0, 1.0]], 25, 1.0, 3);
        let params = super::super::m_step(
            &x,
            &Partition::new(truth, 2).unwrap().one_hot(),
            CovarianceModel::Full,
        )
        .unwrap();
        let via_resp = super::super::c_step(&super::super::e_step(&x, &params).unwrap());
        assert_eq!(classify(&x, &params).unwrap(), via_resp);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn complete_likelihood_never_decreases(seed: u64, g in 1usize..4, model_idx in 0usize..4) {
            let model = [
                CovarianceModel::Full,
                CovarianceModel::Diagonal,
                CovarianceModel::Spherical,
                CovarianceModel::SphericalTied,
            ][model_idx];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(40, 2, |_, _| rng.random::<f64>() * 10.0);
            let o = MixtureOptions { restarts: 1, seed, model, tol: 0.0, ..MixtureOptions::default() };
            let fit = cem(&x, g, &o).unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-8, "{:?}", fit.objective_trace);
            }
        }
    }
}
