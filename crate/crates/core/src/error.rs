use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("learner {index} predicted a point outside the decision set (distance {distance:.3e})")]
    InfeasiblePrediction { index: usize, distance: f64 },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),

    #[error("oracle failure: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
