use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell ({row}, {col}) is outside a {nrows}x{ncols} raster")]
    Index { row: usize, col: usize, nrows: usize, ncols: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("requested {requested} samples but only {available} labeled cells exist")]
    Capacity { requested: usize, available: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot construct model: {0}")]
    ModelConstruction(String),

    /// Linear interpolation was requested for entries that have no measured bins.
    #[error("experimental transiograms have no measured bins for (tail, head) pairs {pairs:?}; use mathematical models for them")]
    UnreliableEntries { pairs: Vec<(usize, usize)> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{}parse error at line {line}: {msg}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, line: usize, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used for process exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Argument,
    Data,
    Parse,
    Model,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Index { .. } | Error::Argument(_) | Error::Capacity { .. } => ErrorCategory::Argument,
            Error::EmptyInput(_) | Error::Data(_) => ErrorCategory::Data,
            Error::Parse { .. } | Error::Schema(_) => ErrorCategory::Parse,
            Error::ModelConstruction(_) | Error::UnreliableEntries { .. } | Error::Config(_) => ErrorCategory::Model,
            Error::Realization { source, .. } => source.category(),
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: Option<&std::path::Path>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.map(|p| p.to_path_buf()), line, msg: msg.into() }
    }
}
