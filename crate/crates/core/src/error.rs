use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A date span of one dataset, used in overlap diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateSpan {
    pub source_id: String,
    pub first: Option<NaiveDate>,
    pub last: Option<NaiveDate>,
}

impl std::fmt::Display for DateSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.first, self.last) {
            (Some(a), Some(b)) => write!(f, "{} [{a} .. {b}]", self.source_id),
            _ => write!(f, "{} [no complete rows]", self.source_id),
        }
    }
}

fn join_spans(spans: &[DateSpan]) -> String {
    spans.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: cannot parse date {value:?} (expected YYYY-MM-DD)")]
    DateFormat { path: PathBuf, row: usize, value: String },

    #[error("{path}: row {row}: duplicate date {date}")]
    DuplicateDate { path: PathBuf, row: usize, date: NaiveDate },

    #[error("{path}: row {row}, column {column:?}: cannot parse {value:?} as a number")]
    CellParse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("no overlapping complete dates between: {}", join_spans(.spans))]
    NoOverlap { spans: Vec<DateSpan> },

    #[error("unresolved reference {reference}: {reason}")]
    UnresolvedRef { reference: String, reason: String },

    #[error("duplicate scenario id {0:?}")]
    DuplicateScenario(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("at least 3 neighbours are required, got {0}")]
    InsufficientNeighbors(usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("series too short: need at least {needed} rows, have {have}")]
    SeriesTooShort { needed: usize, have: usize },

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFiniteData(String),

    #[error("feature width mismatch: model expects {expected}, got {got}")]
    FeatureShape { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("relative error undefined: all {0} actual values are below eps")]
    AllExcluded(usize),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("cell not found: {0}")]
    CellNotFound(String),

    #[error("unknown measure {0:?}")]
    Measure(String),

    #[error("grid trial {assignment} failed: {source}")]
    GridTrial {
        assignment: String,
        #[source]
        source: Box<Error>,
    },

    #[error("every cell of the suite failed ({cells} cells); first error: {first}")]
    SuiteFailed { cells: usize, first: String },

    #[error("run configuration: {0}")]
    RunConfig(String),

    #[error("failed to load {} file(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Ingest(Vec<Error>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether this error (or the error wrapped by a grid trial) is a too-short series.
    pub fn is_series_too_short(&self) -> bool {
        match self {
            Error::SeriesTooShort { .. } => true,
            Error::GridTrial { source, .. } => source.is_series_too_short(),
            _ => false,
        }
    }
}
