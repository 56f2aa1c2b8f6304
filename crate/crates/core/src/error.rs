use thiserror::Error;

pub type Result<T> = std::result::Result<T, NocsError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NocsError {
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },
    #[error("channel must be at least 1x1, got {width}x{height}")]
    EmptyChannel { width: usize, height: usize },
    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("mask flag at index {index} is {value}, expected 0 or 1")]
    NonBinaryFlag { index: usize, value: u8 },
    #[error("at least one reference channel is required")]
    NoReferences,
    #[error("mask is fully masked; at least one valid pixel is required")]
    FullyMasked,
    #[error("coordinate ({row}, {col}) lies outside the {width}x{height} image")]
    OutOfBounds {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("window too small: {available} candidates for a stack of {required}")]
    WindowTooSmall { available: usize, required: usize },
    #[error("underdetermined: {valid} valid entries, at least 2 needed")]
    Underdetermined { valid: usize },
    #[error("empty bar: no valid entries")]
    EmptyBar,
    #[error("reference index {index} out of range for {count} references")]
    BadReferenceIndex { index: usize, count: usize },
    #[error("pixel ({row}, {col}) has no pending bar")]
    NotPending { row: usize, col: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid mask spec: {0}")]
    InvalidMaskSpec(String),
}
