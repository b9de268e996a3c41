use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("set has no grid points at {points_per_axis} points per axis; increase the resolution")]
    EmptyDiscretization { points_per_axis: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("diffusion matrix is singular at cell ({i}, {j})")]
    SingularDiffusion { i: usize, j: usize },

    #[error("non-finite value at cell ({i}, {j}): {what}")]
    NumericalFailure { i: usize, j: usize, what: String },

    #[error("NaN encountered in {0}")]
    NaN(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
