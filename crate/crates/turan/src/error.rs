//! Error types shared across the toolkit.

/// Errors produced by simulator, analysis, and file-format operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A row or cell index fell outside the block geometry.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A characterization report contains no usable entropy.
    #[error("no entropy source: {0}")]
    NoEntropySource(String),

    /// A TRNB bitstream file failed validation. `offset` is the byte
    /// position of the first offending byte.
    #[error("malformed bitstream at byte {offset}: {reason}")]
    MalformedBitstream { offset: u64, reason: String },

    /// An idle-interval trace file failed validation. `record` is the
    /// 1-based CSV record number (the header is record 0).
    #[error("malformed trace at record {record}: {reason}")]
    MalformedTrace { record: u64, reason: String },

    /// A configuration document failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
