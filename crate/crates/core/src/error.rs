use alloc::string::String;

/// Errors produced by the forecasting toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("insufficient length: need at least {needed} samples, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("constant series: standard deviation is zero")]
    ConstantSeries,

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("empty series")]
    Empty,

    #[error("length mismatch: truth has {truth} samples, prediction has {pred}")]
    LengthMismatch { truth: usize, pred: usize },

    #[error("insufficient support: time {time} is outside the source series")]
    InsufficientSupport { time: f64 },

    #[error("zero norm")]
    ZeroNorm,

    #[error("numeric divergence: {0}")]
    NumericDivergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
