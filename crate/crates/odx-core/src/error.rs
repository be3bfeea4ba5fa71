//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two values do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Class conditioning is missing, unexpected, or out of range.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// A scalar argument violates its precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A raw moment of higher order than the closed forms cover was requested.
    #[error("unsupported moment order {order}: closed forms available up to order {max}")]
    UnsupportedMoment { order: usize, max: usize },

    /// A test was applied to a sample outside its supported size range.
    #[error("invalid sample size {n}: {requirement}")]
    SampleSize { n: usize, requirement: String },

    /// Incompatible settings, e.g. a test that does not apply to a prior.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A serialized container or image file is malformed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A computation produced non-finite values or diverged.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn conditioning(msg: impl Into<String>) -> Self {
        Error::Conditioning(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn configuration(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    pub fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
