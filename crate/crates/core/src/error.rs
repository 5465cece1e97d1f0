use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Each variant maps onto a stable, upper-case code (see [`Error::code`]) that the
/// command-line front end emits in its structured error object.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative probability mass {value} at cell {cell}")]
    NegativeMass { cell: usize, value: f64 },

    #[error("table is not normalized: sum deviates from 1 by {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("conditioning event has probability zero")]
    ZeroCondition,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("positivity violation: P(x | {cell}) = 0 while P({cell}) > 0")]
    PositivityViolation { cell: String },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient samples: {required} required, {available} available")]
    InsufficientSamples { required: u64, available: u64 },

    #[error("candidate set has {size} variables, limit is {limit}")]
    CandidateSetTooLarge { size: usize, limit: usize },

    #[error("parameter out of range: {0}")]
    ParamRange(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NegativeMass { .. } => "NEGATIVE_MASS",
            Error::NotNormalized { .. } => "NOT_NORMALIZED",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::UnknownVariable(_) => "UNKNOWN_VARIABLE",
            Error::ZeroCondition => "ZERO_CONDITION",
            Error::Parse { .. } => "PARSE_ERROR",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::PositivityViolation { .. } => "POSITIVITY_VIOLATION",
            Error::OutOfRange(_) => "OUT_OF_RANGE",
            Error::InsufficientSamples { .. } => "INSUFFICIENT_SAMPLES",
            Error::CandidateSetTooLarge { .. } => "CANDIDATE_SET_TOO_LARGE",
            Error::ParamRange(_) => "PARAM_RANGE",
            Error::InvalidQuery(_) => "INVALID_QUERY",
            Error::Io(_) => "IO_ERROR",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
