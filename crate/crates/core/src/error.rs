use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContourError {
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("bad framing: {0}")]
    Framing(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("glyph absent: {0:?}")]
    GlyphAbsent(char),
    #[error("unsupported glyph: {0}")]
    UnsupportedGlyph(String),
    #[error("malformed font: {0}")]
    MalformedFont(String),
    #[error("rate too high: {deleted} deletions leave no point of {total}")]
    RateTooHigh { deleted: usize, total: usize },
    #[error("invalid rate {0}: must lie in [0, 1)")]
    InvalidRate(f64),
    #[error("split error: {0}")]
    Split(String),
    #[error("undefined for empty cloud")]
    EmptyCloud,
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ContourError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ContourError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ContourError> = std::result::Result<T, E>;
