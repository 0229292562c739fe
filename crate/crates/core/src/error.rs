use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-numeric cell at row {row}, column '{column}': {value:?}")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("non-finite value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("target column {0} not found")]
    MissingTarget(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid class label {label} at row {row} (expected an integer in [0, {num_classes}))")]
    InvalidLabel { row: usize, label: f64, num_classes: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("column index {index} out of range for {cols} columns")]
    ColumnOutOfRange { index: usize, cols: usize },
    #[error("no columns selected")]
    EmptySelection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed forest: {0}")]
    MalformedForest(String),
    #[error("mismatched feature sets across runs")]
    MismatchedRuns,
}
