use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Positions in messages are 1-based.
#[derive(Debug, Error)]
pub enum TtwError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("series {index} has length {len}; at least 2 samples are required")]
    TooShort { index: usize, len: usize },

    #[error("series {index} has length {found}, expected {expected}")]
    LengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at series {series}, position {position}")]
    NonFinite { series: usize, position: usize },

    #[error("expected {expected} labels, found {found}")]
    LabelCount { expected: usize, found: usize },

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("{what}: expected {expected_rows}x{expected_cols}, found {found_rows}x{found_cols}")]
    Dimension {
        what: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        found_rows: usize,
        found_cols: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("class {label} has no training members")]
    EmptyClass { label: i64 },

    #[error(
        "class {label} has {size} members but sets of {needed} were requested without replacement"
    )]
    ClassTooSmall {
        label: i64,
        size: usize,
        needed: usize,
    },

    #[error("brute-force DTW is limited to length 10, got {len}")]
    BruteForceTooLong { len: usize },

    #[error("malformed result: {0}")]
    MalformedResult(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("input contains no data rows")]
    EmptyFile,

    #[error("row {row} uses a different delimiter than the rest of the file")]
    InconsistentDelimiter { row: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl TtwError {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, TtwError::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TtwError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, TtwError>;
