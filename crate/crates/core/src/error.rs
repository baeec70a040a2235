use alloc::string::String;

/// Errors produced by the core algorithms and codecs.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("size mismatch: expected {expected} bytes, found {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },
    #[error("row {0} has no finite entry")]
    DegenerateRow(usize),
    #[error("input too short: need at least {needed} items, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined for a constant signal")]
    UndefinedCorrelation,
    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("every frame was removed")]
    EmptyOutput,
    #[error("not computable: {0}")]
    NotComputable(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
