use thiserror::Error;

use crate::estimators::MirrorDescentTrace;

/// Errors raised by constructors and operations of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid dictionary: {0}")]
    InvalidDictionary(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("subset enumeration of size {count} exceeds the cap {cap}; reduce d or k")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("mirror descent diverged at t = {t}")]
    Divergence { t: f64, trace: Box<MirrorDescentTrace> },

    #[error("malformed instance document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
