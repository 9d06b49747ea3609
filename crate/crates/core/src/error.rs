//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear system was too ill-conditioned to solve reliably.
    /// Carries a condition-number estimate of the offending matrix.
    #[error("ill-conditioned system (condition estimate {cond_estimate:.3e})")]
    IllConditioned { cond_estimate: f64 },

    /// An optimization produced a non-finite objective value.
    #[error("non-finite objective at step {step}")]
    NonFinite { step: usize },

    /// Inputs were degenerate for the requested diagnostic (e.g. a zero
    /// denominator in a ratio).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Correlation is undefined for constant signals.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// A container or dataset file violated its format contract.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Exit code for the CLI: 1 for validation errors, 2 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Format(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::UndefinedCorrelation(_) => 1,
            Error::IllConditioned { .. } | Error::NonFinite { .. } | Error::DegenerateInput(_) => 2,
        }
    }
}
