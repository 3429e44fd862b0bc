use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {norm} is not inside the unit ball (|z| must be < 1)")]
    OutsideBall { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("weight alpha = {0} must be greater than -1")]
    InvalidAlpha(f64),

    #[error("unsupported complex dimension n = {0} (quadrature supports n = 1 and n = 2)")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quadrature rule or truncation is too coarse for the requested quantity.
    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("cache file is corrupt: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
