use thiserror::Error;

/// Errors raised by dataset handling, model fitting and the statistical tests.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("no effective training data (all sample weights are zero)")]
    NoEffectiveData,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cannot estimate concept: class {class} is missing from the {set} dataset")]
    CannotEstimateConcept { class: usize, set: &'static str },

    #[error("empty subset: {0}")]
    EmptySubset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
