use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range (length {len})")]
    Index { index: usize, len: usize },

    #[error("covariance factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver failed: {reason} (max residual {residual:.3e})")]
    Eigen { reason: String, residual: f64 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solve { iterations: usize, residual: f64 },

    #[error("resolution {resolution} too coarse for this domain; use {suggested} or finer")]
    Resolution { resolution: f64, suggested: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
