use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid SI value: {0}")]
    InvalidSi(f64),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("correlation {0} outside [0, 1]")]
    CorrelationOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate SI cell {0}")]
    DegenerateSiCell(usize),
    #[error("index {index} out of range for description {description} with {count} indices")]
    IndexOutOfRange {
        description: usize,
        index: usize,
        count: usize,
    },
    #[error("payload does not match channel kind for description {0}")]
    PayloadMismatch(usize),
    #[error("analytic evaluation requires discrete channel")]
    NonDiscreteChannel,
    #[error("inconsistent tables: every tuple with nonzero likelihood has zero prior")]
    InconsistentTables,
    #[error("outside achievable region: {0}")]
    OutsideAchievableRegion(String),
    #[error("unsupported file version {found}, expected {expected}")]
    IncompatibleVersion { found: u32, expected: u32 },
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
