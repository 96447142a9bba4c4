use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("vertex set must be a non-empty proper subset of {p} vertices (got {size})")]
    ImproperSet { size: usize, p: usize },

    #[error("graph is disconnected; spectral operations require lambda_2 > 0")]
    Disconnected,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("exhaustive scan limited to p <= {limit} vertices (got {p})")]
    TooLarge { p: usize, limit: usize },

    #[error("no vertex set has cut sparsity <= {rho}")]
    EmptyClass { rho: f64 },

    #[error("dual solver did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
