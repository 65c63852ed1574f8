//! Gaussian mixtures: densities, E/C/M steps, EM, classification EM and K-means.

pub(crate) mod cem;
mod em;
pub(crate) mod kmeans;

pub use cem::{cem, cem_from_partition, classify};
pub use em::em_gmm;
pub use kmeans::{kmeans, lloyd_from, wcss, KmeansInit, KmeansOptions};

pub(crate) use cem::{cem_run, EmptyPolicy};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix, SpdFactor, Vector};
use crate::par::Execution;

/// Relative size of the covariance eigenvalue floor.
pub const COVARIANCE_EPS: f64 = 1e-6;

/// Covariance family of every component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CovarianceModel {
    #[default]
    Full,
    Diagonal,
    /// `σ_k² I` per component.
    Spherical,
    /// One `σ² I` shared by all components.
    SphericalTied,
}

impl CovarianceModel {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceModel::Full => "full",
            CovarianceModel::Diagonal => "diag",
            CovarianceModel::Spherical => "spherical",
            CovarianceModel::SphericalTied => "spherical-tied",
        }
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovarianceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CovarianceModel::Full),
            "diag" | "diagonal" => Ok(CovarianceModel::Diagonal),
            "spherical" => Ok(CovarianceModel::Spherical),
            "spherical-tied" | "tied" => Ok(CovarianceModel::SphericalTied),
            other => Err(Error::invalid(format!(
                "unknown covariance model '{other}'"
            ))),
        }
    }
}

/// Weights, means (row `k` of `means`) and covariances of a `g`-component mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Matrix,
    pub covariances: Vec<Matrix>,
    pub model: CovarianceModel,
}

impl MixtureParams {
    pub fn new(
        weights: Vec<f64>,
        means: Matrix,
        covariances: Vec<Matrix>,
        model: CovarianceModel,
    ) -> Result<Self> {
        let params = Self {
            weights,
            means,
            covariances,
            model,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn g(&self) -> usize {
        self.weights.len()
    }

    pub fn p(&self) -> usize {
        self.means.ncols()
    }

    pub fn mean(&self, k: usize) -> Vector {
        self.means.row(k).transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.g();
        if g == 0 || self.means.nrows() != g || self.covariances.len() != g {
            return Err(Error::invalid(format!(
                "inconsistent mixture: {} weights, {} means, {} covariances",
                g,
                self.means.nrows(),
                self.covariances.len()
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        crate::linalg::ensure_finite(&self.means, "mixture means")?;
        for cov in &self.covariances {
            if cov.shape() != (self.p(), self.p()) {
                return Err(Error::invalid("covariance shape does not match means"));
            }
        }
        Ok(())
    }

    /// Cholesky factors of every covariance.
    pub fn factors(&self) -> Result<Vec<SpdFactor>> {
        self.covariances.iter().map(SpdFactor::new).collect()
    }
}

/// Hard assignment of `n` rows to `g` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub g: usize,
}

impl Partition {
    pub fn new(assignments: Vec<usize>, g: usize) -> Result<Self> {
        if let Some(&bad) = assignments.iter().find(|&&a| a >= g) {
            return Err(Error::invalid(format!(
                "assignment {bad} out of range for {g} clusters"
            )));
        }
        Ok(Self { assignments, g })
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.g];
        for &a in &self.assignments {
            c[a] += 1;
        }
        c
    }

    pub fn first_empty(&self) -> Option<usize> {
        self.counts().iter().position(|&c| c == 0)
    }

    /// n × g indicator matrix.
    pub fn one_hot(&self) -> Matrix {
        let mut z = Matrix::zeros(self.n(), self.g);
        for (i, &a) in self.assignments.iter().enumerate() {
            z[(i, a)] = 1.0;
        }
        z
    }

    /// `g × p` cluster means of `x`; empty clusters get a zero row.
    pub fn centroids(&self, x: &Matrix) -> Matrix {
        let mut s = Matrix::zeros(self.g, x.ncols());
        for (i, &a) in self.assignments.iter().enumerate() {
            let mut row = s.row_mut(a);
            row += x.row(i);
        }
        for (k, &c) in self.counts().iter().enumerate() {
            if c > 0 {
                s.row_mut(k).scale_mut(1.0 / c as f64);
            }
        }
        s
    }
}

/// Posterior membership probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(pub Matrix);

impl Responsibilities {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

/// Shared fitting options for EM and CEM.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub model: CovarianceModel,
    /// Keep `π_k = 1/g` instead of estimating the weights.
    pub fixed_uniform_weights: bool,
    pub execution: Execution,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            restarts: 20,
            seed: 0,
            model: CovarianceModel::Full,
            fixed_uniform_weights: false,
            execution: Execution::default(),
        }
    }
}

/// Lower bound imposed on every covariance in the M-step.
///
/// The M-step maximizes the likelihood over covariances `Σ_k ⪰ F_k`, which keeps
/// hard-assignment fits away from singular scatter while staying an exact maximizer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CovarianceFloor {
    Isotropic(f64),
    /// One floor matrix per component.
    Anchored(Vec<Matrix>),
}

impl CovarianceFloor {
    /// `ε · tr(cov(X)) / p`, the default scale-aware floor.
    pub fn for_data(x: &Matrix) -> Self {
        let n = x.nrows().max(1) as f64;
        let p = x.ncols().max(1) as f64;
        let trace: f64 = crate::linalg::center_columns(x)
            .column_iter()
            .map(|c| c.norm_squared() / n)
            .sum();
        let level = trace / p;
        CovarianceFloor::Isotropic(COVARIANCE_EPS * if level > 0.0 { level } else { 1.0 })
    }

    fn matrix(&self, k: usize, p: usize) -> Matrix {
        match self {
            CovarianceFloor::Isotropic(l) => Matrix::identity(p, p) * *l,
            CovarianceFloor::Anchored(f) => f[k].clone(),
        }
    }
}

/// Log-density of `N(mean, cov)` at `x`.
pub fn log_gaussian(x: &Vector, mean: &Vector, cov: &Matrix) -> Result<f64> {
    if x.len() != mean.len() || cov.shape() != (x.len(), x.len()) {
        return Err(Error::invalid("dimension mismatch in log_gaussian"));
    }
    let factor = SpdFactor::new(cov)?;
    Ok(log_gaussian_factored(&(x - mean), &factor))
}

fn log_gaussian_factored(diff: &Vector, factor: &SpdFactor) -> f64 {
    let p = diff.len() as f64;
    -0.5 * (p * (2.0 * PI).ln() + factor.log_det() + factor.mahalanobis_sq(diff))
}

/// n × g matrix of `log π_k + log φ_k(x_i)`.
pub fn log_weighted_densities(x: &Matrix, params: &MixtureParams) -> Result<Matrix> {
    if x.ncols() != params.p() {
        return Err(Error::invalid(format!(
            "data has {} columns, mixture has dimension {}",
            x.ncols(),
            params.p()
        )));
    }
    let factors = params.factors()?;
    let g = params.g();
    let mut out = Matrix::zeros(x.nrows(), g);
    let mut diff = Vector::zeros(x.ncols());
    for k in 0..g {
        let log_w = params.weights[k].ln();
        let mean = params.means.row(k);
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                diff[j] = x[(i, j)] - mean[j];
            }
            out[(i, k)] = log_w + log_gaussian_factored(&diff, &factors[k]);
        }
    }
    Ok(out)
}

/// Row-wise log-sum-exp of a log-density matrix.
pub(crate) fn row_log_sum_exp(logd: &Matrix) -> Result<Vec<f64>> {
    (0..logd.nrows())
        .map(|i| {
            let row = logd.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() || row.iter().any(|v| v.is_nan()) {
                return Err(Error::Numerical { row: i });
            }
            Ok(max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln())
        })
        .collect()
}

fn normalize_rows(logd: &Matrix, lse: &[f64]) -> Responsibilities {
    let mut r = logd.clone();
    for (i, mut row) in r.row_iter_mut().enumerate() {
        for v in row.iter_mut() {
            *v = (*v - lse[i]).exp();
        }
        let s = row.sum();
        row.scale_mut(1.0 / s);
    }
    Responsibilities(r)
}

pub fn e_step(x: &Matrix, params: &MixtureParams) -> Result<Responsibilities> {
    let logd = log_weighted_densities(x, params)?;
    let lse = row_log_sum_exp(&logd)?;
    Ok(normalize_rows(&logd, &lse))
}

/// Argmax of each row; ties go to the lowest index.
pub(crate) fn row_argmax(m: &Matrix) -> Vec<usize> {
    m.row_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

pub fn c_step(resp: &Responsibilities) -> Partition {
    Partition {
        assignments: row_argmax(&resp.0),
        g: resp.0.ncols(),
    }
}

/// Weighted-moment M-step with the default covariance floor.
///
/// `weights` is n × g: responsibilities, or a one-hot partition.
pub fn m_step(x: &Matrix, weights: &Matrix, model: CovarianceModel) -> Result<MixtureParams> {
    m_step_floored(x, weights, model, &CovarianceFloor::for_data(x), false)
}

pub(crate) fn m_step_floored(
    x: &Matrix,
    weights: &Matrix,
    model: CovarianceModel,
    floor: &CovarianceFloor,
    uniform_weights: bool,
) -> Result<MixtureParams> {
    let (n, p) = x.shape();
    let g = weights.ncols();
    if weights.nrows() != n || g == 0 {
        return Err(Error::invalid(format!(
            "weights are {}x{}, data has {n} rows",
            weights.nrows(),
            g
        )));
    }
    if let CovarianceFloor::Anchored(f) = floor {
        if f.len() != g {
            return Err(Error::invalid(
                "one covariance floor per component is required",
            ));
        }
    }
    let mass: Vec<f64> = weights.column_iter().map(|c| c.sum()).collect();
    if let Some(k) = mass.iter().position(|&m| m <= f64::MIN_POSITIVE) {
        return Err(Error::EmptyCluster { cluster: k });
    }
    let total_mass: f64 = mass.iter().sum();

    let mut means = weights.transpose() * x;
    for (k, &m) in mass.iter().enumerate() {
        means.row_mut(k).scale_mut(1.0 / m);
    }

    // Weighted scatter per component, normalized by its mass.
    let scatters: Vec<Matrix> = (0..g)
        .map(|k| {
            let mut centered = x.clone();
            for i in 0..n {
                let w = weights[(i, k)].sqrt();
                for j in 0..p {
                    centered[(i, j)] = w * (x[(i, j)] - means[(k, j)]);
                }
            }
            let s = centered.transpose() * &centered / mass[k];
            (&s + s.transpose()) * 0.5
        })
        .collect();

    let covariances: Vec<Matrix> = match model {
        CovarianceModel::Full => scatters
            .iter()
            .enumerate()
            .map(|(k, s)| clip_full(s, &floor.matrix(k, p)))
            .collect::<Result<_>>()?,
        CovarianceModel::Diagonal => scatters
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let f = floor.matrix(k, p);
                Matrix::from_diagonal(&Vector::from_fn(p, |j, _| s[(j, j)].max(f[(j, j)])))
            })
            .collect(),
        CovarianceModel::Spherical => scatters
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let level = (s.trace() / p as f64).max(floor.matrix(k, p).trace() / p as f64);
                Matrix::identity(p, p) * level
            })
            .collect(),
        CovarianceModel::SphericalTied => {
            let pooled = scatters
                .iter()
                .zip(&mass)
                .map(|(s, m)| s.trace() * m)
                .sum::<f64>()
                / (total_mass * p as f64);
            let lower = (0..g)
                .map(|k| floor.matrix(k, p).trace() / p as f64)
                .fold(0.0, f64::max);
            vec![Matrix::identity(p, p) * pooled.max(lower); g]
        }
    };

    let weights_out = if uniform_weights {
        vec![1.0 / g as f64; g]
    } else {
        let mut w: Vec<f64> = mass.iter().map(|m| m / total_mass).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    };
    MixtureParams::new(weights_out, means, covariances, model)
}

/// Maximizes `-log det Σ - tr(Σ⁻¹ S)` over `Σ ⪰ F`: clip the eigenvalues of `S` at 1 in
/// the coordinates where `F` is the identity.
fn clip_full(s: &Matrix, floor: &Matrix) -> Result<Matrix> {
    let l = SpdFactor::new(floor)?.l();
    let a = l
        .solve_lower_triangular(s)
        .ok_or_else(|| Error::Singular("covariance floor is singular".into()))?;
    let white = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::Singular("covariance floor is singular".into()))?;
    let eig = sym_eig(&((&white + white.transpose()) * 0.5))?;
    let p = s.nrows();
    let mut clipped = Matrix::zeros(p, p);
    for (j, &v) in eig.values.iter().enumerate() {
        let u = eig.vectors.column(j);
        clipped += v.max(1.0) * u * u.transpose();
    }
    let cov = &l * clipped * l.transpose();
    Ok((&cov + cov.transpose()) * 0.5)
}

/// `Σ_i log π_{z_i} + log φ_{z_i}(x_i)`.
pub fn complete_log_likelihood(
    x: &Matrix,
    partition: &Partition,
    params: &MixtureParams,
) -> Result<f64> {
    if partition.n() != x.nrows() || partition.g != params.g() {
        return Err(Error::invalid("partition does not match data or mixture"));
    }
    let logd = log_weighted_densities(x, params)?;
    Ok(partition
        .assignments
        .iter()
        .enumerate()
        .map(|(i, &k)| logd[(i, k)])
        .sum())
}

/// `Σ_i log Σ_k π_k φ_k(x_i)`.
pub fn observed_log_likelihood(x: &Matrix, params: &MixtureParams) -> Result<f64> {
    let logd = log_weighted_densities(x, params)?;
    Ok(row_log_sum_exp(&logd)?.iter().sum())
}

pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / prev.abs().max(1.0)
}
