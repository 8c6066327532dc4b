use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("sequence of length {len} exceeds capacity {max}")]
    Capacity { len: usize, max: usize },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("every position in the batch is ignored")]
    DegenerateBatch,
    #[error("format error: {0}")]
    Format(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("normalization error: symbol {0:?} is outside the source alphabet")]
    Normalization(char),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
