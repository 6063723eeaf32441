use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("rate fit needs at least {needed} usable points, got {used}")]
    TooFewPoints { used: usize, needed: usize },

    #[error("memory budget exceeded: {needed} amplitudes requested, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
