use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by file handling, configuration and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: line {line}, column {column}: cannot parse {value:?} as a number")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        value: String,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("dimension mismatch: design has {design_rows} rows but response has {response_rows}")]
    DimensionMismatch { design_rows: usize, response_rows: usize },

    #[error("{path}: non-finite value at line {line}, column {column}")]
    NonFiniteValue { path: PathBuf, line: u64, column: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Numerical(#[from] hdflip_core::Error),

    #[error("{failed} of {total} replications failed, above the 1% limit")]
    TooManyFailures { failed: usize, total: usize },
}

impl Error {
    /// Stable machine-readable category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::Csv { .. } => "parse",
            Error::DimensionMismatch { .. } => "dimension",
            Error::NonFiniteValue { .. } => "non_finite",
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Numerical(_) => "numerical",
            Error::TooManyFailures { .. } => "replication_failures",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Csv { .. } | Error::NonFiniteValue { .. } => 4,
            Error::DimensionMismatch { .. } | Error::Input(_) => 5,
            Error::Config(_) => 6,
            Error::Numerical(_) => 7,
            Error::TooManyFailures { .. } => 8,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
