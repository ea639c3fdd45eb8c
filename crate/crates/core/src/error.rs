use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("{context} did not converge (residual {residual:.3e})")]
    Convergence { context: String, residual: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("state norm vanished ({norm:.3e})")]
    VanishingNorm { norm: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
