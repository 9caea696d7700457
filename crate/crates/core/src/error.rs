use thiserror::Error;

/// Errors raised by the context, estimator and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),

    #[error("point lies outside the support of the distribution")]
    OutOfSupport,

    #[error("density is not differentiable at the given point")]
    Degenerate,

    #[error("truncation region is infeasible: {0}")]
    InfeasibleTruncation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("gram matrix not yet invertible (min eigenvalue {0:e})")]
    NotIdentified(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("{0}")]
    Diagnostics(String),
}

pub type Result<T> = std::result::Result<T, BanditError>;
