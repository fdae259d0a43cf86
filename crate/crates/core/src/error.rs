use thiserror::Error;

/// Errors raised by the lab's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("cluster is empty")]
    EmptyCluster,

    #[error("bisector undefined for coincident centers")]
    DegenerateBisector,

    #[error("non-finite coordinate {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("cannot draw {k} distinct centers from {n} points")]
    InfeasibleInit { k: usize, n: usize },

    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),

    #[error("operation requires d = 1, got d = {0}")]
    WrongDimension(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing context field `{0}`")]
    MissingField(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Parse(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
