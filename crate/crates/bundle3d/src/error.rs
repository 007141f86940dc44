use std::path::PathBuf;

/// Errors from file formats, the backend client and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: file not found", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] bundle3d_core::Error),
    #[error("backend returned HTTP {status}: {excerpt}")]
    BackendStatus { status: u16, excerpt: String },
    #[error("backend request timed out")]
    Timeout,
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("backend response is not a usable bundle: {0}")]
    BadResponse(String),
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures talking to the diffusion backend.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::BackendStatus { .. } | Error::Timeout | Error::Transport(_) | Error::BadResponse(_)
        )
    }
}
