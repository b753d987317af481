use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("operation requires a classification model")]
    NotClassification,

    #[error("label {label} out of range for {num_classes} classes")]
    InvalidLabel { label: usize, num_classes: usize },

    #[error("{party} training diverged at iteration {iteration}")]
    Divergence { party: String, iteration: usize },

    #[error("class {class}: requested {requested} records but only {available} available")]
    InsufficientRecords {
        class: usize,
        requested: usize,
        available: usize,
    },

    #[error("csv parse error at row {row}, column \"{column}\": {message}")]
    CsvCell {
        row: u64,
        column: String,
        message: String,
    },

    #[error("csv file is missing the `{0}` column")]
    MissingColumn(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("policy gradient requires at least one episode")]
    EmptyBatch,

    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
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
