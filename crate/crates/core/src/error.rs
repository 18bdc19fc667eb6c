use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("truncated file at byte offset {offset}: {context}")]
    Truncated { offset: u64, context: String },

    #[error("unexpected trailing data starting at byte offset {offset}")]
    TrailingData { offset: u64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in record {record} at coordinate {coordinate}")]
    NonFinite { record: u64, coordinate: usize },

    #[error("empty record sequence")]
    EmptyInput,

    #[error("prototype table is empty")]
    EmptyTable,

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: u32, num_classes: u32 },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("scenario does not match dataset: {0}")]
    ScenarioMismatch(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("learner state of {actual} bytes exceeds exemplar-free bound of {bound} bytes")]
    StateBoundExceeded { actual: usize, bound: usize },

    #[error("malformed report: {0}")]
    Report(#[from] serde_json::Error),

    #[error("{path} failed validation:\n  {}", violations.join("\n  "))]
    InvalidDataset { path: String, violations: Vec<String> },

    #[error("malformed config: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the environment (files, permissions) rather than
    /// of the data or the request.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
