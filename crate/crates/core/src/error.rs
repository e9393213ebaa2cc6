use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A lemma or theorem was evaluated outside the regime where it applies.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("label query for sample {index} failed: {reason}")]
    Query { index: usize, reason: String },

    #[error(
        "noise level eta = {eta} is not below the low-noise threshold {threshold}; use the noisy-high regime"
    )]
    RegimeMismatch { eta: f64, threshold: f64 },

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("generation failed: {0}")]
    Generation(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
