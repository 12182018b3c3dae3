use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: non-finite or out-of-domain value {value} at index {index}")]
    Numeric {
        op: &'static str,
        index: usize,
        value: f64,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: timestamp {found} does not follow {previous}")]
    Ordering {
        path: PathBuf,
        line: usize,
        previous: String,
        found: String,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("insufficient data: need at least {needed} rows, have {available}")]
    Capacity { needed: usize, available: usize },

    #[error("{path}: expected {expected} rows, found {found}")]
    RowCount { path: PathBuf, expected: usize, found: usize },

    #[error("feature `{feature}` has zero variance on the training segment")]
    DegenerateFeature { feature: String },

    #[error("division by zero truth value at index {index}")]
    DivisionDomain { index: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint integrity: {0}")]
    Integrity(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Migration { found: u32, expected: u32 },

    #[error("experiment protocol violated: {0}")]
    Protocol(String),

    #[error("missing result: {0}")]
    Completeness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Protocol(_) | Error::Completeness(_) | Error::Serde(_) => {
                ErrorClass::Config
            }
            Error::Parse { .. }
            | Error::Ordering { .. }
            | Error::Alignment(_)
            | Error::Capacity { .. }
            | Error::RowCount { .. }
            | Error::DegenerateFeature { .. }
            | Error::Integrity(_)
            | Error::Migration { .. } => ErrorClass::Data,
            Error::Dimension { .. }
            | Error::Numeric { .. }
            | Error::Contract(_)
            | Error::DivisionDomain { .. }
            | Error::Divergence { .. } => ErrorClass::Numeric,
            Error::Io(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
