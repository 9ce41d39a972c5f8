use std::path::PathBuf;

use thiserror::Error;

use crate::schema::ValidationReport;

pub type Result<T> = std::result::Result<T, RoamError>;

/// Errors surfaced by the scoring pipeline.
///
/// `Validation`, `Parse`, `Row`, `Config` and `DegenerateRange` describe
/// problems with the inputs themselves; `Io` covers the environment.
#[derive(Debug, Error)]
pub enum RoamError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema validation failed\n{report}")]
    Validation { report: ValidationReport },

    #[error("criterion '{criterion}': min equals max over retained rows; set degenerate_value to treat it as a constant")]
    DegenerateRange { criterion: String },

    /// Row-scoped data problem; `row` is the 1-based input order.
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("{0}")]
    Config(String),
}

impl RoamError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RoamError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        RoamError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn row(row: usize, message: impl Into<String>) -> Self {
        RoamError::Row {
            row,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        RoamError::Config(message.into())
    }
}
