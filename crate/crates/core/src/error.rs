use thiserror::Error;

/// Errors raised by the optimization toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("shape mismatch: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("point {point:?} lies outside the domain: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate normalization range for objective {objective}: [{lo}, {hi}]")]
    DegenerateAnchors { objective: usize, lo: f64, hi: f64 },

    #[error("covariance matrix is not positive definite after jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("the good subset of the split is empty")]
    EmptyGoodSet,

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("external evaluation of {point:?} failed: {reason}")]
    Evaluation { point: Vec<f64>, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
