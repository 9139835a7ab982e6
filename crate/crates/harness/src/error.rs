use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("ingest failed:\n  {}", .0.join("\n  "))]
    Ingest(Vec<String>),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Core(#[from] setrecon_core::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
