use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// The full design reproduces the response exactly, so the F ratio is undefined.
    #[error("saturated fit: residual sum of squares under the full design is zero")]
    SaturatedFit,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("matrix is not positive semidefinite (pivot {pivot:.3e} at step {step})")]
    NotPsd { step: usize, pivot: f64 },

    #[error("config error: {0}")]
    ConfigError(String),

    #[error("i/o error: {0}")]
    IoError(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::IoError(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
