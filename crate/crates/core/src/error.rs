use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("non-finite value in {context} at entry {index}")]
    NonFinite { context: String, index: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Hessian estimate lost positive definiteness at step {step}; use a larger initial H")]
    HessianBreakdown { step: u64 },

    #[error("csv: row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("csv: missing target column `{0}`")]
    MissingColumn(String),

    #[error("idx: bad magic number {found:#010x}, expected {expected:#010x}")]
    IdxMagic { expected: u32, found: u32 },

    #[error("idx: truncated file (need {needed} bytes, have {have})")]
    IdxTruncated { needed: usize, have: usize },

    #[error("idx: {images} images but {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("idx: label {0} out of range 0..=9")]
    IdxLabel(u8),

    #[error("config: line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("metrics: line {line}: {message}")]
    Metrics { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, expected: usize, got: usize) -> Self {
        Error::Dimension { op, expected, got }
    }
}
