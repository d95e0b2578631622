use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the training and evaluation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("non-finite value produced by {op} at node {node}")]
    NumericOverflow { op: &'static str, node: usize },

    #[error("backward requires a 1x1 output, got {rows}x{cols}")]
    NonScalarOutput { rows: usize, cols: usize },

    #[error("node {0} is not on the tape")]
    UnknownNode(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite loss {value} ({context})")]
    Diverged { value: f64, context: String },

    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    #[error("{0}")]
    Config(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. }
            | Error::NonScalarOutput { .. }
            | Error::UnknownNode(_)
            | Error::ParamMismatch(_) => "shape",
            Error::NumericOverflow { .. } | Error::Diverged { .. } => "numeric",
            Error::InvalidInput(_) => "input",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
