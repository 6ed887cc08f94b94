use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge after {restarts} restarts; achieved residuals {residuals:?}")]
    ConvergenceFailure { restarts: usize, residuals: Vec<f64> },

    #[error("dataset is empty{}", if .0.is_empty() { String::new() } else { format!(": {}", .0) })]
    EmptyDataset(String),

    /// A node or hyperedge has zero degree, so its Laplacian row is undefined.
    #[error("degenerate graph: zero-degree {side} {ids:?}")]
    DegenerateGraph { side: &'static str, ids: Vec<usize> },

    #[error("numeric overflow in {0}")]
    NumericOverflow(String),

    #[error("split failed: {0}")]
    SplitFailure(String),

    #[error("evaluation failed: {0}")]
    EvaluationFailure(String),

    #[error("tuning failed, every cell diverged: {0:?}")]
    TuningFailure(Vec<String>),

    #[error("synthetic generation failed: {0}")]
    GenerationFailure(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("cache mismatch: {0}")]
    CacheMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
