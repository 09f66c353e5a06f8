use thiserror::Error;

/// Errors surfaced by the library. Numerical preconditions fail loudly
/// instead of being clipped or masked.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("wave function vanishes at a probed configuration ({0})")]
    ZeroWaveFunction(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{capability} is not available for the {ansatz} ansatz")]
    Unsupported {
        capability: &'static str,
        ansatz: String,
    },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("run diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("zero-variance series has no defined autocorrelation")]
    ZeroVariance,

    #[error("enumeration of {tuples} tuples exceeds the {limit} guard")]
    EnumerationTooLarge { tuples: u128, limit: u128 },

    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
