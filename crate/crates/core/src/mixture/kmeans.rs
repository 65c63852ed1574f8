use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{relative_change, CovarianceFloor, CovarianceModel, MixtureParams, Partition};
use crate::error::{Error, Result};
use crate::fit::{best_of_restarts, FitResult, RunOutcome};
use crate::linalg::Matrix;
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KmeansInit {
    /// D²-weighted seeding.
    #[default]
    PlusPlus,
    /// Uniformly random labels, empty clusters patched.
    RandomPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init: KmeansInit,
    pub execution: Execution,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            restarts: 20,
            seed: 0,
            init: KmeansInit::PlusPlus,
            execution: Execution::default(),
        }
    }
}

/// Within-cluster sum of squares around the cluster means.
pub fn wcss(x: &Matrix, partition: &Partition) -> f64 {
    wcss_with(x, partition, &partition.centroids(x))
}

fn wcss_with(x: &Matrix, partition: &Partition, centroids: &Matrix) -> f64 {
    partition
        .assignments
        .iter()
        .enumerate()
        .map(|(i, &k)| (x.row(i) - centroids.row(k)).norm_squared())
        .sum()
}

pub fn kmeans(x: &Matrix, g: usize, opts: &KmeansOptions) -> Result<FitResult> {
    check_sizes(x, g)?;
    best_of_restarts(opts.restarts, opts.seed, opts.execution, |_, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = initial_partition(x, g, opts.init, &mut rng);
        let (partition, trace, iterations) = lloyd_from(x, &init, opts.max_iter, opts.tol)?;
        let params = centroid_params(x, &partition)?;
        Ok(RunOutcome {
            partition,
            params,
            bundle: None,
            trace,
            iterations,
        })
    })
}

pub(crate) fn check_sizes(x: &Matrix, g: usize) -> Result<()> {
    if g == 0 || x.nrows() < g {
        return Err(Error::invalid(format!(
            "need 1 <= g <= n, got g = {g} with n = {}",
            x.nrows()
        )));
    }
    crate::linalg::ensure_finite(x, "data matrix")
}

pub(crate) fn initial_partition(
    x: &Matrix,
    g: usize,
    init: KmeansInit,
    rng: &mut ChaCha8Rng,
) -> Partition {
    let n = x.nrows();
    let mut partition = match init {
        KmeansInit::PlusPlus => {
            let seeds = plus_plus_seeds(x, g, rng);
            let centers = Matrix::from_fn(g, x.ncols(), |k, j| x[(seeds[k], j)]);
            Partition {
                assignments: nearest(x, &centers),
                g,
            }
        }
        KmeansInit::RandomPartition => Partition {
            assignments: (0..n).map(|_| rng.random_range(0..g)).collect(),
            g,
        },
    };
    // Seeds can coincide with other seeds' points (duplicates), or random labels can miss
    // a cluster: hand each empty cluster a random member of a cluster that can spare one.
    while let Some(k) = partition.first_empty() {
        let counts = partition.counts();
        let donors: Vec<usize> = (0..n)
            .filter(|&i| counts[partition.assignments[i]] > 1)
            .collect();
        let i = donors[rng.random_range(0..donors.len())];
        partition.assignments[i] = k;
    }
    partition
}

fn plus_plus_seeds(x: &Matrix, g: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.nrows();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| (x.row(i) - x.row(seeds[0])).norm_squared())
        .collect();
    while seeds.len() < g {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        seeds.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min((x.row(i) - x.row(next)).norm_squared());
        }
    }
    seeds
}

/// Index of the nearest centroid per row; ties go to the lowest index.
pub(crate) fn nearest(x: &Matrix, centroids: &Matrix) -> Vec<usize> {
    (0..x.nrows())
        .map(|i| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for k in 0..centroids.nrows() {
                let d = (x.row(i) - centroids.row(k)).norm_squared();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Lloyd iterations from a non-degenerate partition.
///
/// Returns the final partition, the WCSS trace (initial state first) and the iteration
/// count. An emptied cluster is reseeded with the point farthest from its current centroid.
/// When Lloyd stalls, a single-point transfer sweep runs and, if it moved anything, counts
/// as one iteration before Lloyd resumes.
pub fn lloyd_from(
    x: &Matrix,
    init: &Partition,
    max_iter: usize,
    tol: f64,
) -> Result<(Partition, Vec<f64>, usize)> {
    check_sizes(x, init.g)?;
    if init.n() != x.nrows() {
        return Err(Error::invalid("initial partition does not match data"));
    }
    if let Some(k) = init.first_empty() {
        return Err(Error::EmptyCluster { cluster: k });
    }
    let mut partition = init.clone();
    let mut centroids = partition.centroids(x);
    let mut trace = vec![wcss_with(x, &partition, &centroids)];
    let mut iterations = 0;
    while iterations < max_iter {
        let mut next = Partition {
            assignments: nearest(x, &centroids),
            g: init.g,
        };
        while let Some(k) = next.first_empty() {
            let counts = next.counts();
            let far = (0..x.nrows())
                .filter(|&i| counts[next.assignments[i]] > 1)
                .map(|i| {
                    (
                        i,
                        (x.row(i) - centroids.row(next.assignments[i])).norm_squared(),
                    )
                })
                .fold((usize::MAX, f64::NEG_INFINITY), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                })
                .0;
            next.assignments[far] = k;
        }
        centroids = next.centroids(x);
        let value = wcss_with(x, &next, &centroids);
        iterations += 1;
        let prev = *trace.last().unwrap();
        trace.push(value);
        let unchanged = next == partition;
        partition = next;
        if unchanged || relative_change(prev, value) < tol {
            // A Lloyd fixed point can still lose WCSS by moving a single point once the
            // centroid shifts are accounted for.
            if iterations < max_iter && transfer_pass(x, &mut partition, &mut centroids) {
                iterations += 1;
                trace.push(wcss_with(x, &partition, &centroids));
                continue;
            }
            break;
        }
    }
    Ok((partition, trace, iterations))
}

/// One sweep of single-point transfers: point `i` leaves cluster `r` for `k` when
/// `n_k/(n_k+1)·‖x-c_k‖² < n_r/(n_r-1)·‖x-c_r‖²`. Centroids are updated in place.
/// Returns whether any point moved.
fn transfer_pass(x: &Matrix, partition: &mut Partition, centroids: &mut Matrix) -> bool {
    let mut counts = partition.counts();
    let mut moved = false;
    for i in 0..x.nrows() {
        let r = partition.assignments[i];
        if counts[r] < 2 {
            continue;
        }
        let nr = counts[r] as f64;
        let leave = nr / (nr - 1.0) * (x.row(i) - centroids.row(r)).norm_squared();
        let mut best = (r, leave);
        for k in (0..partition.g).filter(|&k| k != r) {
            let nk = counts[k] as f64;
            let join = nk / (nk + 1.0) * (x.row(i) - centroids.row(k)).norm_squared();
            if join < best.1 {
                best = (k, join);
            }
        }
        let (k, join) = best;
        if k == r || leave - join <= 1e-12 * leave.max(1.0) {
            continue;
        }
        let nk = counts[k] as f64;
        let old_r = centroids.row(r).into_owned();
        let old_k = centroids.row(k).into_owned();
        centroids.set_row(r, &((old_r * nr - x.row(i)) / (nr - 1.0)));
        centroids.set_row(k, &((old_k * nk + x.row(i)) / (nk + 1.0)));
        counts[r] -= 1;
        counts[k] += 1;
        partition.assignments[i] = k;
        moved = true;
    }
    if moved {
        // Refresh to avoid drift from the incremental updates.
        *centroids = partition.centroids(x);
    }
    moved
}

/// Spherical-tied mixture parameters matching a hard partition: the K-means model.
pub(crate) fn centroid_params(x: &Matrix, partition: &Partition) -> Result<MixtureParams> {
    super::m_step_floored(
        x,
        &partition.one_hot(),
        CovarianceModel::SphericalTied,
        &CovarianceFloor::for_data(x),
        false,
    )
}
