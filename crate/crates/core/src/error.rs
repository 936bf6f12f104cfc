use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimators and their data plumbing.
#[derive(Debug, Error)]
pub enum GarError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("row {row}: non-numeric value `{value}` in column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: timestamp `{label}` is not strictly after the previous one")]
    UnorderedTimestamp { row: usize, label: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("horizon {horizon} outside [1, {max}]")]
    InvalidHorizon { horizon: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("threshold {threshold} is on the wrong side of the median {median} for the {side} tail")]
    ThresholdMedian {
        side: crate::TailSide,
        threshold: f64,
        median: f64,
    },

    #[error("only {found} tail exceedances, need at least {required}")]
    TooFewExceedances { found: usize, required: usize },

    #[error("singular curvature matrix ({0})")]
    SingularCurvature(&'static str),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("all kernel weights vanish at the query point")]
    ZeroKernelWeight,

    #[error("constant covariate column {0}: bandwidth undefined")]
    ConstantCovariate(usize),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("infinite tail expectation: tail exponent {0} <= 1 so the first moment does not exist")]
    InfiniteTailExpectation(f64),

    #[error("probability {tau} is not beyond the threshold probability {boundary} of the {side} tail")]
    OutsideTail {
        side: crate::TailSide,
        tau: f64,
        boundary: f64,
    },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("no admissible threshold candidate")]
    NoAdmissibleThreshold,

    #[error("window too short: {0}")]
    WindowTooShort(String),
}

impl GarError {
    /// Whether the failure comes from malformed or inadequate input data, as
    /// opposed to a numerical breakdown of an estimator.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            GarError::Io { .. }
                | GarError::Csv(_)
                | GarError::MissingColumn(_)
                | GarError::MissingValue { .. }
                | GarError::NonNumeric { .. }
                | GarError::UnorderedTimestamp { .. }
                | GarError::EmptyDataset
                | GarError::WindowTooShort(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GarError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> GarError {
    GarError::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
