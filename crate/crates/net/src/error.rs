use std::path::{Path, PathBuf};

use contourfill_core::ContourError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("sequence of {len} records exceeds max_len {max}")]
    Length { len: usize, max: usize },
    #[error("class {class} out of range for the {head} head ({classes} classes)")]
    Class {
        head: &'static str,
        class: usize,
        classes: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {terms}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        terms: String,
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("oracle mismatch: {0}")]
    Oracle(String),
    #[error("no {0} data")]
    EmptyData(&'static str),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NetError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn checkpoint(path: &Path, message: impl Into<String>) -> Self {
        Self::Checkpoint {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;
