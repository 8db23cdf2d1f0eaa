use thiserror::Error;

/// Errors produced by the cellwise toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported shape: {0}")]
    Shape(String),

    #[error("matrix is not positive definite: smallest eigenvalue {eigenvalue:e} is at or below the floor {floor:e}")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("{what} did not converge in {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("too few complete pairs: {0}")]
    DataSparsity(String),

    #[error("degenerate covariance update: {0}")]
    Degenerate(String),

    #[error("columns rejected: {}", .0.join("; "))]
    RejectedColumns(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
