use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("not a bijection on [0, {n}): {reason}")]
    NotBijection { n: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid cycle signature: {0}")]
    InvalidSignature(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("symbol {symbol} out of alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
