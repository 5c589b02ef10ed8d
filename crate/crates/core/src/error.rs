//! Error type shared by every module of the toolkit.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A hyperparameter or argument is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Backward pass invoked with a tape that does not belong to the network state.
    #[error("tape error: {0}")]
    Tape(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training diverged.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    /// Malformed text file content; `line` is 1-based and counts the header.
    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    /// Malformed binary checkpoint.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Dataset content violates a precondition (overlap, single class, emptiness).
    #[error("data error: {0}")]
    Data(String),

    /// Input outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation called on an object in the wrong lifecycle state.
    #[error("state error: {0}")]
    State(String),

    /// Metric undefined for the given inputs.
    #[error("metric error: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }

    /// Process exit code for the command-line runner:
    /// 2 config, 3 data/format, 4 numeric/training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Numeric(_) | Error::Training { .. } | Error::Tape(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Shape { .. }
            | Error::Format { .. }
            | Error::Checkpoint(_)
            | Error::Data(_)
            | Error::Domain(_)
            | Error::State(_)
            | Error::Metric(_)
            | Error::Io { .. } => 3,
        }
    }
}
