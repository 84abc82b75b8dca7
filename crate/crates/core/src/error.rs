//! Error type shared across the crate.

use std::fmt;

/// Crate-wide error enum. Variants are coarse-grained on purpose: the CLI
/// maps each variant to a distinct exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    ShapeMismatch { op: &'static str, detail: String },
    /// An operation received a NaN or infinite input.
    NonFinite { context: String },
    /// A vector or model dimension does not match what the call expects.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// Parameter out of its documented range, or a malformed request.
    InvalidArgument(String),
    /// A tape handle was used with a tape that did not create it.
    TapeMismatch { op: &'static str },
    /// Backward was asked to differentiate a non-scalar value.
    NotScalar { op: &'static str, len: usize },
    /// A gradient was requested for a tensor that is not a tape leaf.
    NotLeaf { op: &'static str },
    /// The operation does not apply to this model kind.
    UnsupportedKind {
        op: &'static str,
        kind: &'static str,
    },
    /// A numeric procedure produced a non-finite or otherwise unusable value.
    NumericFailure { context: String },
    /// Filesystem problem (missing file, unreadable directory, write failure).
    Io { path: String, message: String },
    /// A file exists but its contents do not parse or validate.
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => {
                write!(f, "shape mismatch in {op}: {detail}")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::DimensionMismatch {
                context,
                expected,
                got,
            } => write!(f, "dimension mismatch in {context}: expected {expected}, got {got}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::TapeMismatch { op } => {
                write!(f, "{op}: variable does not belong to this tape")
            }
            Error::NotScalar { op, len } => {
                write!(f, "{op}: expected a scalar value, got {len} elements")
            }
            Error::NotLeaf { op } => write!(f, "{op}: gradient target is not a tape leaf"),
            Error::UnsupportedKind { op, kind } => {
                write!(f, "{op} does not support {kind} models")
            }
            Error::NumericFailure { context } => write!(f, "numeric failure: {context}"),
            Error::Io { path, message } => write!(f, "io error at {path}: {message}"),
            Error::Parse { path, message } => write!(f, "parse error in {path}: {message}"),
        }
    }
}

impl std::error::Error for Error {}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, err: impl fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn parse(path: impl AsRef<std::path::Path>, err: impl fmt::Display) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
