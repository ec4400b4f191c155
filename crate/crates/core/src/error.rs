use thiserror::Error;

/// Errors raised by mechanisms, checkers and instance parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no bidders/outcomes")]
    Empty,

    #[error(
        "invalid value {value} for bidder {bidder}, outcome {outcome}: must be finite and >= 0"
    )]
    InvalidValue {
        bidder: usize,
        outcome: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("chosen outcome {chosen} does not match the allocation {expected}")]
    OutcomeMismatch { chosen: usize, expected: usize },

    #[error("payment formula produced negative externality (scaled sum {0:e})")]
    NegativeExternality(f64),

    #[error("virtual price not invertible: {0} lies outside the function's range")]
    NotInvertible(f64),

    #[error("allocation rule not monotone: x({at}) = {level} < x({prev_at}) = {prev_level}")]
    NotMonotone {
        prev_at: f64,
        prev_level: f64,
        at: f64,
        level: f64,
    },

    #[error("alpha not strictly descending")]
    AlphaNotDescending,

    #[error("tied scores: bidders {first} and {second} share score {score}")]
    TiedScores {
        first: usize,
        second: usize,
        score: f64,
    },

    #[error("{pointer}: {message}")]
    Instance { pointer: String, message: String },

    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<Error> },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn instance(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Instance {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
