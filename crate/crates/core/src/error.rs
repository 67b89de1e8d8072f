use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the rainforge toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image data: {0}")]
    CorruptImage(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("expected {expected} channel(s), got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular homography (|det| = {0:e})")]
    SingularHomography(f64),

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("no homography with at least 4 inliers found")]
    NoModel,

    #[error("image too small: {0}")]
    ImageTooSmall(String),

    #[error("empty region mask")]
    EmptyMask,

    #[error("zero-norm feature vector")]
    ZeroNorm,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("malformed manifest line {line}: {message}")]
    ManifestLine { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("export error: {0}")]
    Export(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
