use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An API contract was violated by the caller (call order, collective
    /// argument mismatch, operation on a finalized runtime, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("startup failure: {0}")]
    Startup(String),

    #[error("access [{offset}, {end}) out of range for segment {segment} on unit {unit} (length {length})")]
    OutOfRange {
        unit: u32,
        segment: u16,
        offset: u64,
        end: u64,
        length: u64,
    },

    #[error("unknown segment {segment} on unit {unit}")]
    UnknownSegment { unit: u32, segment: u16 },

    #[error("allocation failure: {0}")]
    Allocation(String),

    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid pattern: {0}")]
    Pattern(String),

    #[error("locality: {0}")]
    Locality(String),

    #[error("transport: {0}")]
    Transport(String),

    #[error("benchmark invalid: {0}")]
    Benchmark(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(position: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: msg.into(),
        }
    }
}
