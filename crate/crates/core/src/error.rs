use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} regressors, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parameter domain violation: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("information matrix is not positive definite (condition number {condition:.3e})")]
    SingularInformation { condition: f64 },

    #[error("c = {c} lies within {eps:e} of the pole at {pole}")]
    Pole { c: f64, pole: f64, eps: f64 },

    #[error("quadrature failed to reach tolerance {tol:e} (error estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("{failed} of {total} bootstrap replications failed (limit is 20%)")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("optimizer failed: {0}")]
    Optimization(String),
}
