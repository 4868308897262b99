use thiserror::Error;

/// Errors produced by the storage systems and their building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A privacy charge would exceed the configured total.
    #[error("privacy budget exceeded by charge `{label}`: requested {requested}, remaining {remaining}")]
    BudgetExceeded {
        label: String,
        requested: f64,
        remaining: f64,
    },

    /// A released count fell below the true count it must cover.
    #[error("sanitizer undershoot at slot {slot}: released {released} < true {actual}")]
    Undershoot {
        slot: usize,
        released: i64,
        actual: i64,
    },

    /// A bucket holds more real records than its padded capacity.
    #[error("bucket {bucket} overflow: {count} real records exceed capacity {capacity}")]
    BucketOverflow {
        bucket: usize,
        count: usize,
        capacity: usize,
    },

    /// A server request was malformed, e.g. an out-of-bounds index.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// A ciphertext failed authentication.
    #[error("ciphertext authentication failed")]
    Authentication,

    /// The Path ORAM stash grew past its configured bound.
    #[error("ORAM stash overflow: {size} blocks exceed limit {limit}")]
    OramOverflow { size: usize, limit: usize },

    /// No free storage remains for a new record or batch.
    #[error("capacity exhausted: {0}")]
    CapacityExhausted(String),

    /// The operation is not offered by this system.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
