use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("kernel singularity at x = 0 with zero regularization")]
    Singularity,
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("iterate collapsed toward the boundary of the domain: {0}")]
    Boundary(String),
    #[error("gradient flow diverged: {0}")]
    Divergence(String),
    #[error("numerical instability at step {step}: {reason}")]
    Instability { step: usize, reason: String },
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// A value paired with non-fatal warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Warned<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl<T> Warned<T> {
    pub fn clean(value: T) -> Self {
        Warned { value, warnings: Vec::new() }
    }
}
