use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any stage of the pipeline. Harness stages wrap these
/// with a stage tag so CLI diagnostics point at the failing phase.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("operation requires at least one hidden neuron (K = 0)")]
    EmptyNetwork,

    #[error("probability out of [0,1]: {0}")]
    BadProbability(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("neuron cap of {cap} reached; growth halted")]
    CapacityExceeded { cap: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("class label {label} out of range 1..={s}")]
    LabelOutOfRange { label: usize, s: usize },

    #[error("class {class} has no samples")]
    DegenerateClass { class: usize },

    #[error("binary-only metric called with {s} classes")]
    BinaryOnly { s: usize },

    #[error("cannot split: class {class} has only {count} samples")]
    ClassTooSmall { class: usize, count: usize },

    #[error("column {column:?} has no observed values; cannot impute")]
    AllMissing { column: String },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("unparseable cell at row {row}, column {column}: {value:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("snapshot version {found} not supported (expected {expected})")]
    SnapshotVersion { found: u32, expected: u32 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
