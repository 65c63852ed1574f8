//! Joint clustering and embedding: alternating minimization of
//! `‖X - BQᵀ‖² + δ‖B - M‖² - Σ_i log π_{z_i} φ(m_i; s_{z_i}, Σ_{z_i})`
//! over the orthonormal embedding `B`, loadings `Q`, coupled representation `M` and the
//! classification mixture `(Z, π, S, Σ)`.

use crate::data::{knn_graph_with, smooth, standardize};
use crate::error::{Error, Result};
use crate::fit::{best_of_restarts, FitResult, RunOutcome};
use crate::linalg::{center_columns, frobenius_sq, thin_svd, Matrix, SpdFactor};
use crate::mixture::{
    cem_run, complete_log_likelihood, CovarianceModel, MixtureParams, Partition, COVARIANCE_EPS,
};
use crate::mixture::{CovarianceFloor, EmptyPolicy, KmeansInit};
use crate::par::Execution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relative singular-value threshold below which `XQ + δM` counts as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Iteration cap of the CEM that initializes each restart on `B`.
const INIT_CEM_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBundle {
    /// n × p, orthonormal columns.
    pub b: Matrix,
    /// d × p loadings.
    pub q: Matrix,
    /// n × p coupled representation.
    pub m: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CempcaConfig {
    pub g: usize,
    /// Latent dimension; `None` means `min(10, d)` of the matrix entering the loop.
    pub p: Option<usize>,
    pub delta: f64,
    /// Neighbours per point in the smoothing graph.
    pub k: usize,
    /// Smoothing power: the loop sees `Wᵐ X`.
    pub m: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub model: CovarianceModel,
    pub standardize: bool,
    /// Feed the row-normalized graph itself as the data matrix.
    pub graph_as_features: bool,
    pub execution: Execution,
}

impl CempcaConfig {
    pub fn new(g: usize) -> Self {
        Self {
            g,
            p: None,
            delta: 1e-6,
            k: 15,
            m: 2,
            restarts: 20,
            max_iter: 40,
            tol: 1e-6,
            model: CovarianceModel::Full,
            standardize: true,
            graph_as_features: false,
            execution: Execution::default(),
        }
    }

    pub fn resolved_p(&self, d: usize) -> usize {
        self.p.unwrap_or(d.min(10))
    }
}

/// Leading `p` principal directions of the column-centered `x`.
///
/// Returns `(B, Q)`: `B` holds the first `p` left singular vectors, `Q = X_cᵀ B`.
pub fn pca_embed(x: &Matrix, p: usize) -> Result<(Matrix, Matrix)> {
    let (n, d) = x.shape();
    if p == 0 || p > d || p + 1 > n {
        return Err(Error::invalid(format!(
            "latent dimension {p} must lie in 1..=min(n-1, d) = {}",
            d.min(n.saturating_sub(1))
        )));
    }
    let centered = center_columns(x);
    let svd = thin_svd(&centered)?;
    let b = svd.u.columns(0, p).into_owned();
    let q = centered.transpose() * &b;
    Ok((b, q))
}

/// `Q = Xᵀ B`.
pub fn update_q(x: &Matrix, b: &Matrix) -> Result<Matrix> {
    if x.nrows() != b.nrows() {
        return Err(Error::invalid(format!(
            "X has {} rows, B has {}",
            x.nrows(),
            b.nrows()
        )));
    }
    Ok(x.transpose() * b)
}

/// Orthonormal `B = UVᵀ` maximizing `tr((XQ + δM) Bᵀ)`, from the SVD `XQ + δM = UDVᵀ`.
pub fn update_b(x: &Matrix, q: &Matrix, m: &Matrix, delta: f64) -> Result<Matrix> {
    if x.ncols() != q.nrows() || m.shape() != (x.nrows(), q.ncols()) {
        return Err(Error::invalid("inconsistent shapes in update_b"));
    }
    let target = x * q + m * delta;
    let svd = thin_svd(&target)?;
    let p = q.ncols();
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    let low = svd.singular_values.get(p - 1).copied().unwrap_or(0.0);
    if !(top > 0.0) || low <= RANK_TOL * top {
        return Err(Error::DegenerateUpdate(format!(
            "XQ + δM has singular values down to {low:e} (largest {top:e})"
        )));
    }
    Ok(&svd.u * svd.v.transpose())
}

/// Row-wise `m_i = (Σ_k⁻¹ + δI)⁻¹ (δ b_i + Σ_k⁻¹ s_k)` for `k = z_i`.
///
/// Solved in the equivalent form `(I + δΣ_k) m_i = δΣ_k b_i + s_k`, which stays
/// well-posed at `δ = 0`.
pub fn update_m(
    b: &Matrix,
    partition: &Partition,
    params: &MixtureParams,
    delta: f64,
) -> Result<Matrix> {
    let (n, p) = b.shape();
    if partition.n() != n || params.p() != p || partition.g != params.g() {
        return Err(Error::invalid("inconsistent shapes in update_m"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid(format!(
            "delta must be non-negative, got {delta}"
        )));
    }
    let eye = Matrix::identity(p, p);
    let systems: Vec<SpdFactor> = params
        .covariances
        .iter()
        .map(|cov| {
            let a = &eye + cov * delta;
            SpdFactor::new(&((&a + a.transpose()) * 0.5))
        })
        .collect::<Result<_>>()?;
    let mut m = Matrix::zeros(n, p);
    for (i, &k) in partition.assignments.iter().enumerate() {
        let rhs = &params.covariances[k] * b.row(i).transpose() * delta + params.mean(k);
        m.row_mut(i)
            .copy_from(&systems[k].solve_vec(&rhs).transpose());
    }
    Ok(m)
}

/// The three-term joint objective.
pub fn objective(
    x: &Matrix,
    bundle: &EmbeddingBundle,
    partition: &Partition,
    params: &MixtureParams,
    delta: f64,
) -> Result<f64> {
    let reconstruction = frobenius_sq(&(x - &bundle.b * bundle.q.transpose()));
    let coupling = delta * frobenius_sq(&(&bundle.b - &bundle.m));
    let likelihood = complete_log_likelihood(&bundle.m, partition, params)?;
    Ok(reconstruction + coupling - likelihood)
}

/// Applies the preprocessing pipeline: optional standardization, the neighbour graph and
/// smoothing (or the graph itself as features), then column centering.
pub fn prepare_data(x_raw: &Matrix, cfg: &CempcaConfig) -> Result<Matrix> {
    crate::linalg::ensure_finite(x_raw, "data matrix")?;
    let x = if cfg.standardize {
        standardize(x_raw)?
    } else {
        x_raw.clone()
    };
    let smoothed = if cfg.graph_as_features {
        knn_graph_with(&x, cfg.k, cfg.execution)?.to_dense()
    } else if cfg.m > 0 {
        let w = knn_graph_with(&x, cfg.k, cfg.execution)?;
        smooth(&x, &w, cfg.m)?
    } else {
        x
    };
    Ok(center_columns(&smoothed))
}

/// State of one CEM-PCA run, exposed so each block update can be inspected.
#[derive(Debug, Clone)]
pub struct CempcaState {
    pub x: Matrix,
    pub bundle: EmbeddingBundle,
    pub partition: Partition,
    pub params: MixtureParams,
    pub delta: f64,
    pub model: CovarianceModel,
    floor: CovarianceFloor,
}

impl CempcaState {
    /// PCA embedding, a seeded CEM on `B`, and `M = B`.
    ///
    /// Covariances of later CEM steps are kept above `ε` times those of this initial fit,
    /// so the likelihood term stays bounded while `M` contracts towards the centroids.
    pub fn initialize(
        x: &Matrix,
        g: usize,
        p: usize,
        delta: f64,
        model: CovarianceModel,
        seed: u64,
    ) -> Result<Self> {
        let (b, q) = pca_embed(x, p)?;
        Self::from_embedding(x.clone(), b, q, g, delta, model, seed, KmeansInit::PlusPlus)
    }

    /// `start` picks the partition the initial CEM starts from: K-means (`PlusPlus`) or
    /// uniformly random labels (`RandomPartition`).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_embedding(
        x: Matrix,
        b: Matrix,
        q: Matrix,
        g: usize,
        delta: f64,
        model: CovarianceModel,
        seed: u64,
        start: KmeansInit,
    ) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::invalid(format!(
                "delta must be non-negative, got {delta}"
            )));
        }
        crate::mixture::kmeans::check_sizes(&b, g)?;
        let start = match start {
            KmeansInit::PlusPlus => {
                crate::mixture::cem::kmeans_start(&b, g, seed, INIT_CEM_MAX_ITER)?
            }
            KmeansInit::RandomPartition => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                crate::mixture::kmeans::initial_partition(&b, g, start, &mut rng)
            }
        };
        let init = cem_run(
            &b,
            &start,
            model,
            INIT_CEM_MAX_ITER,
            0.0,
            false,
            &CovarianceFloor::for_data(&b),
            EmptyPolicy::Reseed,
        )?;
        let floor = CovarianceFloor::Anchored(
            init.params
                .covariances
                .iter()
                .map(|c| c * COVARIANCE_EPS)
                .collect(),
        );
        Ok(Self {
            bundle: EmbeddingBundle { m: b.clone(), b, q },
            x,
            partition: init.partition,
            params: init.params,
            delta,
            model,
            floor,
        })
    }

    pub fn objective(&self) -> Result<f64> {
        objective(
            &self.x,
            &self.bundle,
            &self.partition,
            &self.params,
            self.delta,
        )
    }

    /// Step 1: closed-form `M`.
    pub fn step_m(&mut self) -> Result<()> {
        self.bundle.m = update_m(&self.bundle.b, &self.partition, &self.params, self.delta)?;
        Ok(())
    }

    /// Step 2: one E, C, M cycle of CEM on the rows of `M`. A C-step that would empty a
    /// cluster is discarded.
    pub fn step_cem(&mut self) -> Result<()> {
        let (partition, params, _) = crate::mixture::cem::cem_step(
            &self.bundle.m,
            &self.partition,
            &self.params,
            self.model,
            &self.floor,
            false,
            EmptyPolicy::KeepPrevious,
        )?;
        self.partition = partition;
        self.params = params;
        Ok(())
    }

    /// Step 3: Procrustes update of `B`.
    pub fn step_b(&mut self) -> Result<()> {
        self.bundle.b = update_b(&self.x, &self.bundle.q, &self.bundle.m, self.delta)?;
        Ok(())
    }

    /// Step 4: `Q = XᵀB`.
    pub fn step_q(&mut self) -> Result<()> {
        self.bundle.q = update_q(&self.x, &self.bundle.b)?;
        Ok(())
    }

    /// Steps 1 to 4; returns the objective afterwards.
    pub fn iterate(&mut self) -> Result<f64> {
        self.step_m()?;
        self.step_cem()?;
        self.step_b()?;
        self.step_q()?;
        self.objective()
    }

    /// Iterates until the relative objective change drops below `tol` or `max_iter`
    /// iterations ran. Returns the trace (initial objective first) and iteration count.
    pub fn run(&mut self, max_iter: usize, tol: f64) -> Result<(Vec<f64>, usize)> {
        let mut trace = vec![self.objective()?];
        let mut iterations = 0;
        while iterations < max_iter {
            let value = self.iterate()?;
            iterations += 1;
            let prev = *trace.last().unwrap();
            trace.push(value);
            if crate::mixture::relative_change(prev, value) < tol {
                break;
            }
        }
        Ok((trace, iterations))
    }
}

/// Starting partitions for the initial CEM, cycled over restarts.
const RESTART_STARTS: [KmeansInit; 2] = [KmeansInit::PlusPlus, KmeansInit::RandomPartition];

/// Full pipeline with restarts; the restart with the lowest final objective wins.
///
/// Every restart shares the preprocessed data and the PCA initialization; only the CEM
/// seeding on `B` differs. Restarts alternate between a K-means start and a random
/// partition: hard assignments rarely leave a K-means split for nested clusters.
pub fn fit_cempca(x_raw: &Matrix, cfg: &CempcaConfig, seed: u64) -> Result<FitResult> {
    let x = prepare_data(x_raw, cfg)?;
    let (n, d) = x.shape();
    let p = cfg.resolved_p(d);
    if cfg.g == 0 || n < cfg.g {
        return Err(Error::invalid(format!(
            "need 1 <= g <= n, got g = {} with n = {n}",
            cfg.g
        )));
    }
    if !(cfg.delta >= 0.0) {
        return Err(Error::invalid(format!(
            "delta must be non-negative, got {}",
            cfg.delta
        )));
    }
    let (b, q) = pca_embed(&x, p)?;
    best_of_restarts(
        cfg.restarts,
        seed,
        cfg.execution,
        |restart, restart_seed| {
            let mut state = CempcaState::from_embedding(
                x.clone(),
                b.clone(),
                q.clone(),
                cfg.g,
                cfg.delta,
                cfg.model,
                restart_seed,
                RESTART_STARTS[restart % RESTART_STARTS.len()],
            )?;
            let (trace, iterations) = state.run(cfg.max_iter, cfg.tol)?;
            Ok(RunOutcome {
                partition: state.partition,
                params: state.params,
                bundle: Some(state.bundle),
                trace,
                iterations,
            })
        },
    )
}
