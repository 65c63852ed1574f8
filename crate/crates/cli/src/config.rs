use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use cempca::cempca::CempcaConfig;
use cempca::mixture::{CovarianceModel, KmeansInit, KmeansOptions, MixtureOptions};

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Cempca,
    EmGmm,
    Cem,
    Kmeans,
    KmeansPca,
    ReducedKmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cempca => "cempca",
            Method::EmGmm => "em-gmm",
            Method::Cem => "cem",
            Method::Kmeans => "kmeans",
            Method::KmeansPca => "kmeans-pca",
            Method::ReducedKmeans => "reduced-kmeans",
        }
    }

    /// Methods whose fit carries a `(B, M)` embedding.
    pub fn has_embedding(self) -> bool {
        matches!(
            self,
            Method::Cempca | Method::KmeansPca | Method::ReducedKmeans
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Covariance {
    Full,
    Diag,
    Spherical,
    SphericalTied,
}

impl From<Covariance> for CovarianceModel {
    fn from(c: Covariance) -> Self {
        match c {
            Covariance::Full => CovarianceModel::Full,
            Covariance::Diag => CovarianceModel::Diagonal,
            Covariance::Spherical => CovarianceModel::Spherical,
            Covariance::SphericalTied => CovarianceModel::SphericalTied,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Plusplus,
    RandomPartition,
}

impl From<Init> for KmeansInit {
    fn from(i: Init) -> Self {
        match i {
            Init::Plusplus => KmeansInit::PlusPlus,
            Init::RandomPartition => KmeansInit::RandomPartition,
        }
    }
}

/// Partially specified settings; later layers override earlier ones field by field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub g: Option<usize>,
    pub p: Option<usize>,
    pub delta: Option<f64>,
    pub neighbors: Option<usize>,
    pub smooth: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub cov: Option<Covariance>,
    pub init: Option<Init>,
    pub standardize: Option<bool>,
    pub graph_as_features: Option<bool>,
}

impl Settings {
    /// `self` with every field that `top` sets replaced.
    pub fn overlay(&self, top: &Settings) -> Settings {
        Settings {
            g: top.g.or(self.g),
            p: top.p.or(self.p),
            delta: top.delta.or(self.delta),
            neighbors: top.neighbors.or(self.neighbors),
            smooth: top.smooth.or(self.smooth),
            restarts: top.restarts.or(self.restarts),
            seed: top.seed.or(self.seed),
            max_iter: top.max_iter.or(self.max_iter),
            tol: top.tol.or(self.tol),
            cov: top.cov.or(self.cov),
            init: top.init.or(self.init),
            standardize: top.standardize.or(self.standardize),
            graph_as_features: top.graph_as_features.or(self.graph_as_features),
        }
    }

    /// Fills every default for `method` on data of shape `n × d` with `classes` known labels.
    pub fn resolve(
        &self,
        method: Method,
        n: usize,
        d: usize,
        classes: Option<usize>,
    ) -> Result<ResolvedConfig> {
        let g = self
            .g
            .or(classes)
            .ok_or_else(|| CliError::Usage("--g is required when the data has no labels".into()))?;
        let p = match method {
            Method::Cempca if self.graph_as_features.unwrap_or(false) => Some(self.p.unwrap_or(10)),
            Method::Cempca | Method::ReducedKmeans => Some(self.p.unwrap_or(d.min(10))),
            Method::KmeansPca => Some(self.p.unwrap_or(2)),
            Method::EmGmm | Method::Cem | Method::Kmeans => None,
        };
        if let Some(p) = p {
            let cap = if method == Method::Cempca {
                d
            } else {
                d.min(n.saturating_sub(1))
            };
            if p == 0 || (p > cap && !self.graph_as_features.unwrap_or(false)) {
                return Err(CliError::Usage(format!(
                    "--p must be in 1..={cap} for {} on {n} x {d} data, got {p}",
                    method.name()
                )));
            }
        }
        let resolved = ResolvedConfig {
            method,
            g,
            p,
            delta: self.delta.unwrap_or(1e-6),
            neighbors: self.neighbors.unwrap_or(15),
            smooth: self.smooth.unwrap_or(2),
            restarts: self.restarts.unwrap_or(20),
            seed: self.seed.unwrap_or(0),
            max_iter: self
                .max_iter
                .unwrap_or(if method == Method::Cempca { 40 } else { 100 }),
            tol: self.tol.unwrap_or(1e-6),
            cov: self.cov.unwrap_or(Covariance::Full),
            init: self.init.unwrap_or(Init::Plusplus),
            standardize: self.standardize.unwrap_or(method == Method::Cempca),
            graph_as_features: self.graph_as_features.unwrap_or(false),
        };
        if resolved.restarts == 0 {
            return Err(CliError::Usage("--restarts must be at least 1".into()));
        }
        if resolved.delta.is_nan()
            || resolved.delta < 0.0
            || resolved.tol.is_nan()
            || resolved.tol < 0.0
        {
            return Err(CliError::Usage(
                "--delta and --tol must be non-negative".into(),
            ));
        }
        Ok(resolved)
    }
}

/// Every setting of a run, after defaults; embedded in each result so it can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub method: Method,
    pub g: usize,
    /// Latent dimension; absent for methods that work in the data space.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub delta: f64,
    pub neighbors: usize,
    pub smooth: usize,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub cov: Covariance,
    pub init: Init,
    pub standardize: bool,
    pub graph_as_features: bool,
}

impl ResolvedConfig {
    /// The same configuration as a fully specified settings layer.
    pub fn as_settings(&self) -> Settings {
        Settings {
            g: Some(self.g),
            p: self.p,
            delta: Some(self.delta),
            neighbors: Some(self.neighbors),
            smooth: Some(self.smooth),
            restarts: Some(self.restarts),
            seed: Some(self.seed),
            max_iter: Some(self.max_iter),
            tol: Some(self.tol),
            cov: Some(self.cov),
            init: Some(self.init),
            standardize: Some(self.standardize),
            graph_as_features: Some(self.graph_as_features),
        }
    }

    pub fn cempca(&self) -> CempcaConfig {
        let mut cfg = CempcaConfig::new(self.g);
        cfg.p = self.p;
        cfg.delta = self.delta;
        cfg.k = self.neighbors;
        cfg.m = self.smooth;
        cfg.restarts = self.restarts;
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        cfg.model = self.cov.into();
        cfg.standardize = self.standardize;
        cfg.graph_as_features = self.graph_as_features;
        cfg
    }

    pub fn mixture(&self) -> MixtureOptions {
        MixtureOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
            seed: self.seed,
            model: self.cov.into(),
            ..MixtureOptions::default()
        }
    }

    pub fn kmeans(&self) -> KmeansOptions {
        KmeansOptions {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
            seed: self.seed,
            init: self.init.into(),
            ..KmeansOptions::default()
        }
    }
}
