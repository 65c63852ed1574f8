use super::cem::kmeans_start;
use super::kmeans::check_sizes;
use super::{
    log_weighted_densities, m_step_floored, relative_change, row_argmax, row_log_sum_exp,
    CovarianceFloor, MixtureOptions, Partition,
};
use crate::error::Result;
use crate::fit::{best_of_restarts, FitResult, RunOutcome};
use crate::linalg::Matrix;

/// EM for a Gaussian mixture, started from a K-means partition in every restart.
///
/// The trace holds the negative observed-data log-likelihood. The returned partition is the
/// MAP assignment under the final parameters.
pub fn em_gmm(x: &Matrix, g: usize, opts: &MixtureOptions) -> Result<FitResult> {
    check_sizes(x, g)?;
    let floor = CovarianceFloor::for_data(x);
    let uniform = opts.fixed_uniform_weights;
    best_of_restarts(opts.restarts, opts.seed, opts.execution, |_, seed| {
        let init = kmeans_start(x, g, seed, opts.max_iter)?;
        let mut params = m_step_floored(x, &init.one_hot(), opts.model, &floor, uniform)?;
        let mut logd = log_weighted_densities(x, &params)?;
        let mut lse = row_log_sum_exp(&logd)?;
        let mut trace = vec![-lse.iter().sum::<f64>()];
        let mut iterations = 0;
        while iterations < opts.max_iter {
            let mut resp = logd.clone();
            for (i, mut row) in resp.row_iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v = (*v - lse[i]).exp();
                }
            }
            params = m_step_floored(x, &resp, opts.model, &floor, uniform)?;
            logd = log_weighted_densities(x, &params)?;
            lse = row_log_sum_exp(&logd)?;
            let value = -lse.iter().sum::<f64>();
            iterations += 1;
            let prev = *trace.last().unwrap();
            trace.push(value);
            if relative_change(prev, value) < opts.tol {
                break;
            }
        }
        Ok(RunOutcome {
            partition: Partition {
                assignments: row_argmax(&logd),
                g,
            },
            params,
            bundle: None,
            trace,
            iterations,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{center_columns, column_means};
    use crate::metrics::ari;
    use crate::mixture::CovarianceModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn far_blobs_are_recovered_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(100, 2, |i, _| {
            (if i < 50 { 0.0 } else { 20.0 }) + rng.sample::<f64, _>(StandardNormal)
        });
        let truth: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        let fit = em_gmm(
            &x,
            2,
            &MixtureOptions {
                restarts: 3,
                ..MixtureOptions::default()
            },
        )
        .unwrap();
        assert_eq!(ari(&truth, &fit.partition.assignments).unwrap(), 1.0);
    }

    #[test]
    fn single_component_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Matrix::from_fn(50, 3, |_, j| rng.random::<f64>() * (j + 1) as f64);
        let fit = em_gmm(
            &x,
            1,
            &MixtureOptions {
                restarts: 1,
                ..MixtureOptions::default()
            },
        )
        .unwrap();
        assert_eq!(fit.iterations, 1);
        assert!((fit.params.mean(0) - column_means(&x)).amax() < 1e-12);
        let c = center_columns(&x);
        let cov = c.transpose() * &c / 50.0;
        assert!((&fit.params.covariances[0] - cov).amax() < 1e-10);
    }

    #[test]
    fn fits_are_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Matrix::from_fn(60, 2, |_, _| rng.random::<f64>() * 5.0);
        let o = MixtureOptions {
            restarts: 4,
            seed: 99,
            ..MixtureOptions::default()
        };
        assert!(em_gmm(&x, 3, &o)
            .unwrap()
            .same_outcome(&em_gmm(&x, 3, &o).unwrap()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn observed_likelihood_never_decreases(seed: u64, g in 1usize..4, model_idx in 0usize..4) {
            let model = [
                CovarianceModel::Full,
                CovarianceModel::Diagonal,
                CovarianceModel::Spherical,
                CovarianceModel::SphericalTied,
            ][model_idx];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Matrix::from_fn(40, 2, |_, _| rng.random::<f64>() * 10.0);
            let o = MixtureOptions { restarts: 1, seed, model, tol: 0.0, max_iter: 60, ..MixtureOptions::default() };
            let fit = em_gmm(&x, g, &o).unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-8, "{:?}", fit.objective_trace);
            }
        }
    }
}
