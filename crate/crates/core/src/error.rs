use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0} cannot be quantized")]
    NonFinite(f64),

    #[error("invalid Q format: {0} fractional bits (expected 0..=15)")]
    InvalidQFormat(u32),

    #[error("limit violation: {0}")]
    Limit(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("layer {layer}: {msg}")]
    LayerMismatch { layer: usize, msg: String },

    #[error("truncated stream at word {word_offset}")]
    Truncated { word_offset: usize },

    #[error("sparsity map / pixel count mismatch at word {word_offset}")]
    CountMismatch { word_offset: usize },

    #[error("stream overruns declared dimensions at word {word_offset}")]
    Overrun { word_offset: usize },

    #[error("bad magic in {what}: expected {expected:?}")]
    BadMagic { what: &'static str, expected: &'static str },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schedule does not match layer: {0}")]
    Schedule(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
