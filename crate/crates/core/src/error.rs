//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A state object is unusable (e.g. zero norm).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The request would require a dense object beyond the supported size.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// The observable lies outside the visible space of the measurement
    /// ensemble and cannot be estimated from the data.
    #[error("invisible observable: {0}")]
    InvisibleObservable(String),

    /// A diagnostic ratio is undefined because its denominator vanishes.
    #[error("degenerate diagnostic: {0}")]
    DegenerateDiagnostic(String),

    /// Every optimization restart diverged.
    #[error("training failed: {0}")]
    TrainingFailed(String),

    /// A probability oracle returned inconsistent values.
    #[error("invalid oracle: {0}")]
    InvalidOracle(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
