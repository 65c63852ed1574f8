use thiserror::Error;

/// Errors raised by the numerical kernels, data loaders and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must be positive-definite failed its Cholesky factorization.
    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    /// Every component assigns zero density to this row.
    #[error("all mixture components are degenerate for row {row}")]
    Numerical { row: usize },

    /// `XQ + δM` lost column rank, so the orthonormal factor is not unique.
    #[error("degenerate embedding update: {0}")]
    DegenerateUpdate(String),

    #[error("all {restarts} restarts failed; last error: {last}")]
    AllRestartsFailed { restarts: usize, last: Box<Error> },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the data or arguments rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
