use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by data ingestion, model construction and the command layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: data row {row}, column `{column}`: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } | Error::Format { .. } => "parse",
            Error::InvalidData(_) => "invalid_data",
            Error::InvalidGraph(_) => "invalid_graph",
            Error::Dimension(_) => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
