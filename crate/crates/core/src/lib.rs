//! Joint clustering and embedding by classification EM on a PCA-coupled latent space,
//! with the mixture sub-algorithms, graph smoothing, baselines, metrics and synthetic data
//! it is evaluated on.

// `!(x >= 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cempca;
pub mod data;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod par;

pub use error::{Error, Result};
pub use fit::FitResult;
pub use par::Execution;
