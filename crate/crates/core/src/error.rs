use thiserror::Error;

/// Errors produced by the estimators, the interval builders and the simulation drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {required} points, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("design points must be strictly increasing (violation at index {0})")]
    NotIncreasing(usize),

    #[error("duplicate design point {value} at index {index}")]
    DuplicateDesign { index: usize, value: f64 },

    #[error("negative observation {value} at index {index}")]
    NegativeObservation { index: usize, value: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("point {t} lies outside the domain [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("{0} one-sided derivative is not available at the boundary")]
    SideUnavailable(&'static str),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("linear piece has zero width at {0}")]
    ZeroWidthPiece(f64),

    #[error("no design points fall inside [{u}, {v}]; fall back to the fixed-design sigma estimate")]
    EmptyPiece { u: f64, v: f64 },

    #[error("no noise scale available: {0}")]
    MissingScale(String),

    #[error("critical-value table lacks statistic {0}")]
    MissingStatistic(String),

    #[error("delta {delta} is outside the tabulated range [{lo}, {hi}] for {statistic}")]
    DeltaOutsideGrid {
        statistic: String,
        delta: f64,
        lo: f64,
        hi: f64,
    },

    #[error("level/delta must lie strictly inside (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("the function grid does not match the data design")]
    MismatchedGrid,

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failures} of {attempted} replications failed (limit 1%)")]
    FailureRate { failures: usize, attempted: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
