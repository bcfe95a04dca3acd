use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("rank-deficient matrix; null direction {direction:?}")]
    RankDeficient { direction: Vec<f64> },

    #[error("unsupported dimension {dim} (maximum {max})")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("chain occupies a zero-density point: {0}")]
    InvalidState(String),

    #[error("degenerate chains: {0}")]
    DegenerateChains(String),

    #[error("unreliable estimate: {0}")]
    UnreliableEstimate(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
