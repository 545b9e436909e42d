use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed textual input. `token` is the offending fragment.
    #[error("parse error: {message} (at `{token}`)")]
    Parse { token: String, message: String },

    /// A well-formed value outside its admissible domain.
    #[error("range error: {0}")]
    Range(String),

    /// Input data that violates a schema or domain rule. `row` is 1-based and
    /// counts the header line, so it matches what an editor shows.
    #[error("validation error at row {row}: {message}")]
    Validation { row: usize, message: String },

    /// Invalid run configuration (rates, scenario, render parameters).
    #[error("configuration error: {0}")]
    Config(String),

    /// Operands that do not fit together (dimensions, zone orderings, tags).
    #[error("contract error: {0}")]
    Contract(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(token: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            token: token.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
