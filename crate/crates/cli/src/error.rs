use std::io::ErrorKind;
use std::path::PathBuf;

use contourfill_core::ContourError;
use contourfill_net::NetError;
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("bad data: {0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{failed} of {total} glyphs failed")]
    GlyphFailures { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Data(_) => 5,
            CliError::Runtime(_) => 6,
            CliError::GlyphFailures { .. } => 7,
        }
    }
}

impl From<ContourError> for CliError {
    fn from(e: ContourError) -> Self {
        match e {
            ContourError::Io { path, source } if source.kind() == ErrorKind::NotFound => CliError::MissingFile(path),
            ContourError::Io { .. } | ContourError::Image(_) => CliError::Runtime(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Contour(c) => c.into(),
            NetError::Io { path, source } if source.kind() == ErrorKind::NotFound => CliError::MissingFile(path),
            NetError::Checkpoint { .. } | NetError::ConfigFile { .. } | NetError::Config(_) => {
                CliError::Mismatch(e.to_string())
            }
            NetError::Length { .. } | NetError::Class { .. } | NetError::Oracle(_) | NetError::EmptyData(_) => {
                CliError::Data(e.to_string())
            }
            NetError::NonFinite { .. } | NetError::Io { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
