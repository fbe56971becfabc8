use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("direction is degenerate (eigenvalue gap {gap:e})")]
    Degenerate { gap: f64 },
    #[error("path crosses a degenerate direction at index {index} (gap {gap:e})")]
    DegenerateCrossing { index: usize, gap: f64 },
    #[error("mode {mode} is gamma-degenerate")]
    GammaDegenerate { mode: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
