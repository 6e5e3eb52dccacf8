use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("document `{id}`: {reason}")]
    Validation { id: String, reason: String },

    #[error("gain is undefined for a zero baseline")]
    UndefinedGain,

    #[error(transparent)]
    Scorer(#[from] ScorerFailure),
}

/// Failure reported by a [`PairScorer`](crate::semantic::PairScorer).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScorerFailure {
    #[error("scorer `{scorer}` unreachable after {attempts} attempts: {message}")]
    Transport { scorer: String, attempts: u32, message: String },

    #[error("scorer `{scorer}` protocol error: {message}")]
    Protocol { scorer: String, message: String },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
