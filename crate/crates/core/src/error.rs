use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{what} has {size} entries, above the cap of {cap}")]
    Cap { what: String, size: usize, cap: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
