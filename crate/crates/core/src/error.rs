use thiserror::Error;

/// Errors surfaced by the interpolation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is structurally valid but geometrically unusable
    /// (rank-deficient covariance, ambiguous rotation axis, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateInput(msg.into())
    }
}
