use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sentence of length {n} is too long for exhaustive enumeration (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("infeasible projection target: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Whether the error stems from malformed user input rather than a
    /// runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Invalid(_)
                | Error::DimensionMismatch { .. }
                | Error::TooLarge { .. }
                | Error::Infeasible(_)
                | Error::Unsupported(_)
                | Error::Parse { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
