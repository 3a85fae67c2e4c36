use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("evidence invariant violated: {0}")]
    InvalidEvidence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid label {value} at sample {sample}, event {event} (expected 0 or 1)")]
    InvalidLabel { sample: usize, event: usize, value: f64 },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite weights in parameter `{0}`")]
    NonFiniteWeights(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    FormatVersion { found: String, expected: u32 },

    #[error("model file truncated: {0}")]
    Truncated(String),

    #[error("tensor `{name}` inconsistent with header: {detail}")]
    TensorInconsistent { name: String, detail: String },

    #[error("malformed model header: {0}")]
    Header(String),

    #[error("model kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("training diverged (NaN loss) in phase {phase}")]
    Diverged { phase: usize },

    #[error("every search candidate failed")]
    AllCandidatesFailed,

    #[error("operator graph contains a cycle")]
    CyclicGraph,

    #[error("{0}")]
    Graph(String),

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
