use std::fmt;
use std::path::PathBuf;

use cascade_edl::Error as CoreError;

/// Process exit codes. Every failure prints exactly one line to stderr,
/// `error[<kind>]: <message>`, and exits with the code for its kind.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    /// Unknown flag, bad flag value, missing required flag.
    pub const USAGE: i32 = 2;
    /// Invalid or inconsistent configuration values.
    pub const CONFIG: i32 = 3;
    /// Missing or malformed dataset.
    pub const DATA: i32 = 4;
    /// Unreadable, truncated or incompatible model file.
    pub const MODEL: i32 = 5;
    /// Model does not fit the data or the requested operation.
    pub const MISMATCH: i32 = 6;
    pub const IO: i32 = 7;
    /// Training diverged or every search candidate failed.
    pub const TRAINING: i32 = 8;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Mismatch(String),
    Io { path: PathBuf, source: std::io::Error },
    Core(CoreError),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Config(_) => exit::CONFIG,
            CliError::Mismatch(_) => exit::MISMATCH,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                CoreError::Config(_) | CoreError::Domain(_) => exit::CONFIG,
                CoreError::Data(_)
                | CoreError::InvalidLabel { .. }
                | CoreError::Csv(_)
                | CoreError::EmptyCalibration => exit::DATA,
                CoreError::FormatVersion { .. }
                | CoreError::Truncated(_)
                | CoreError::TensorInconsistent { .. }
                | CoreError::Header(_)
                | CoreError::NonFiniteWeights(_) => exit::MODEL,
                CoreError::KindMismatch { .. } | CoreError::Dimension { .. } => exit::MISMATCH,
                CoreError::Io { .. } => exit::IO,
                CoreError::Diverged { .. } | CoreError::AllCandidatesFailed | CoreError::NonFiniteGradient(_) => {
                    exit::TRAINING
                }
                _ => exit::INTERNAL,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.code() {
            exit::USAGE => "usage",
            exit::CONFIG => "config",
            exit::DATA => "data",
            exit::MODEL => "model",
            exit::MISMATCH => "mismatch",
            exit::IO => "io",
            exit::TRAINING => "training",
            _ => "internal",
        }
    }

    /// The single stderr line for this error.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.kind(), msg.trim())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Mismatch(m) => f.write_str(m),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(CoreError::Json(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
