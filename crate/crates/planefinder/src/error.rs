use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: data holds {got} bytes, header implies {expected}")]
    SizeMismatch { path: PathBuf, expected: u64, got: u64 },
    #[error("config: {0}")]
    Config(String),
    #[error("manifest {path}, line {line}: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error("bundle: {0}")]
    Bundle(String),
    #[error("{stage} failed for {volume}: {source}")]
    Stage {
        stage: &'static str,
        volume: String,
        #[source]
        source: planefinder_core::Error,
    },
    #[error(transparent)]
    Core(#[from] planefinder_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }
}
