use std::path::PathBuf;

use crate::markov::ErgodicityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("item index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("item {0} compared with itself")]
    SelfComparison(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "transition matrix is not ergodic ({} strongly connected components, aperiodic={})",
        .0.component_count, .0.aperiodic
    )]
    NotErgodic(ErgodicityReport),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("bound hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("lambda {lambda} outside the admissible range (0, {upper})")]
    LambdaOutOfRange { lambda: f64, upper: f64 },

    #[error("epsilon {epsilon} must exceed 2λ/γ = {floor}")]
    EpsilonTooSmall { epsilon: f64, floor: f64 },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
