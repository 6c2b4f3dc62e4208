use thiserror::Error;

/// Errors across the crate. `is_hypothesis_violation` distinguishes inputs that
/// are malformed from inputs that are valid but fall outside the hypotheses of
/// the underlying theorems (callers map these to different exit codes).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("tail sequence invalid at index {index}: {reason}")]
    BadTail { index: u64, reason: String },

    #[error("index {n} beyond partition horizon {horizon}")]
    BeyondHorizon { n: u64, horizon: u64 },

    #[error("invalid digits: {0}")]
    InvalidDigits(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{value} outside {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("insufficient digits: need {needed} Farey levels, digits cover {available}")]
    InsufficientDigits { needed: u64, available: u64 },

    #[error("exact arithmetic unavailable: {0}")]
    ExactUnavailable(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dyadic partition excluded: {0}")]
    DyadicExcluded(String),

    #[error("level s = {s} outside admissible range ({s_minus}, {s_plus})")]
    SOutOfRange { s: f64, s_minus: f64, s_plus: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that report a theorem-hypothesis violation rather than
    /// malformed input (e.g. classifying over the dyadic partition, or a level
    /// outside (s_-, s_+)).
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::DyadicExcluded(_) | Error::SOutOfRange { .. } | Error::Hypothesis(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
