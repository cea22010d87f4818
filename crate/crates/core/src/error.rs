use thiserror::Error;

/// Rejected filter or analysis parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dataset size n must be at least 1")]
    ZeroCapacity,
    #[error("load factor must lie in (0, 1], got {0}")]
    LoadFactor(f64),
    #[error("bin shape is invalid: k={k}, Q={quotients}, R={remainder_bits}")]
    Shape {
        k: u32,
        quotients: u32,
        remainder_bits: u32,
    },
    #[error("fingerprint range m*s exceeds 2^64")]
    FingerprintRange,
    #[error("the bin table only supports k=25, Q=25, R=8")]
    UnsupportedShape,
    #[error("spare headroom factor must be positive and finite, got {0}")]
    SpareHeadroom(f64),
}

/// Why an insertion did not complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum InsertError {
    /// More than `n` insertions were attempted.
    #[error("filter already holds its maximum of {n} keys")]
    CapacityExceeded { n: u64 },
    /// The spare refused a forwarded fingerprint; the filter has failed.
    #[error("spare filter overflowed")]
    SpareOverflow,
}

/// Returned by a spare when it cannot accept another key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("spare filter is at capacity")]
pub struct SpareOverflow;

/// Returned by [`crate::PocketDictionary::insert`] on a full dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("pocket dictionary is full")]
pub struct PdFull;

/// Deserialization failures. Each variant maps to a distinct error code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("stream truncated")]
    Truncated,
    #[error("invalid parameters in header: {0}")]
    InvalidParams(String),
    #[error("bin {0} is not a valid pocket dictionary")]
    CorruptBin(u64),
    #[error("corrupt spare: {0}")]
    CorruptSpare(&'static str),
    #[error("{0} trailing bytes after filter")]
    TrailingBytes(usize),
}

impl DecodeError {
    /// Stable numeric code for each failure class.
    pub fn code(&self) -> u32 {
        match self {
            DecodeError::BadMagic => 1,
            DecodeError::UnsupportedVersion(_) => 2,
            DecodeError::Truncated => 3,
            DecodeError::InvalidParams(_) => 4,
            DecodeError::CorruptBin(_) => 5,
            DecodeError::CorruptSpare(_) => 6,
            DecodeError::TrailingBytes(_) => 7,
        }
    }
}

/// Domain violations in the analysis functions.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AnalysisError {
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("index {j} exceeds trial count {n}")]
    IndexOutOfRange { n: u64, j: u64 },
    #[error("parameters outside the domain of this formula: {0}")]
    Domain(&'static str),
}
