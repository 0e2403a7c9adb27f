use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeeseError {
    #[error("input shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    TrainingDiverged { iteration: usize, loss: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("evaluator fault: {0}")]
    EvaluatorFault(String),

    #[error("query budget of {budget} exhausted")]
    BudgetExceeded { budget: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("target observation component {index} is zero")]
    InvalidTarget { index: usize },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("missing fixture {}", .0.display())]
    MissingFixture(PathBuf),

    #[error("malformed fixture {name}: {reason}")]
    MalformedFixture { name: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GeeseError>;

impl GeeseError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GeeseError::Io { path: path.into(), source }
    }
}
