use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // ingestion
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("timestamps are not strictly increasing on a 30-minute grid (line {line})")]
    NonMonotonicTimestamps { line: usize },
    #[error("dataset contains no complete days")]
    EmptyDataset,
    #[error("degenerate min-max range: max {max} must exceed min {min}")]
    DegenerateRange { min: f64, max: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("missing channel: {0}")]
    MissingChannel(String),
    #[error("no data for {0}")]
    MissingDay(chrono::NaiveDate),

    // weather volatility
    #[error("window {start}..{end} is not fully covered by {available} samples")]
    IncompleteWindow {
        start: usize,
        end: usize,
        available: usize,
    },
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("calibrated thresholds are degenerate for {factor}: {low} / {med} / {high}")]
    CalibrationDegenerate {
        factor: String,
        low: f64,
        med: f64,
        high: f64,
    },
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    // sequence networks
    #[error("invalid layer dimensions: {0}")]
    InvalidDims(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // model
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("loss diverged in {phase} at iteration {iteration}")]
    DivergedLoss { phase: String, iteration: usize },
    #[error("phase order violation: {0}")]
    PhaseOrderViolation(String),
    #[error("noise sigma must be finite and >= 1, got {0}")]
    InvalidSigma(f64),
    #[error("model has not completed training")]
    UntrainedModel,
    #[error("checkpoint format version {found} is not supported (expected {expected}); {hint}")]
    VersionMismatch {
        found: u32,
        expected: u32,
        hint: String,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    // intervals and metrics
    #[error("scenario set is empty")]
    EmptySet,
    #[error("need at least {needed} scenarios for nominal coverage {nominal}, got {got}")]
    TooFewScenarios {
        needed: usize,
        got: usize,
        nominal: f64,
    },
    #[error("condition mismatch: {left} vs {right}")]
    ConditionMismatch { left: String, right: String },
    #[error("no evaluation runs")]
    EmptyRuns,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
