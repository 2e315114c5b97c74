use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("element is not geometric: symmetric part of level 2 deviates from half the square of level 1 by {violation:e}")]
    NonGeometric { violation: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A named inequality required by the experiment does not hold.
    #[error("{constraint} violated: {detail}")]
    Constraint { constraint: String, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn constraint(constraint: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Constraint {
            constraint: constraint.into(),
            detail: detail.into(),
        }
    }

    /// True for errors caused by parameters the caller chose, as opposed to
    /// failures while running.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::Constraint { .. } | Error::InvalidParameter(_) | Error::NonFinite(_)
        )
    }
}
