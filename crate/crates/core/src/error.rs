use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("header mismatch: {0}")]
    Header(String),

    #[error("row {row}, column `{column}`: {message}")]
    Malformed {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown ethnicity token `{token}` at row {row}")]
    UnknownEthnicity { row: usize, token: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("missing fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("column `{0}` has zero variance and cannot be standardized")]
    ZeroVariance(String),

    #[error("cohort is empty")]
    EmptyCohort,

    #[error("no events in data")]
    NoEvents,

    #[error("stratum `{stratum}` has {count} rows; at least 2 are required")]
    SmallStratum { stratum: &'static str, count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}; standardize the covariates before fitting")]
    Overflow(&'static str),

    #[error(
        "monotone likelihood: coefficient `{feature}` escaped |beta| > {bound}; \
         the data appear separable, refit with the ridge option"
    )]
    Separation { feature: String, bound: f64 },

    #[error("Hessian is singular or not positive definite")]
    SingularHessian,

    #[error("no comparable pairs for the concordance index")]
    NoComparablePairs,

    #[error("horizon {horizon} is beyond the data coverage ({coverage})")]
    HorizonOutOfRange { horizon: f64, coverage: f64 },

    #[error("{failures} of {attempts} bootstrap resamples failed")]
    BootstrapFailures { failures: usize, attempts: usize },

    #[error("every minibatch lacked events; nothing to train on")]
    NoTrainableBatches,

    #[error("target mean risk {0} cannot be bracketed by a baseline survival in (1e-9, 1 - 1e-9)")]
    CalibrationBracket(f64),

    #[error("feature `{0}` is not modifiable")]
    NotModifiable(String),

    #[error("value out of range for `{field}`: {message}")]
    OutOfRange { field: String, message: String },

    #[error("model format: {0}")]
    Format(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::InvalidConfig(_) => ErrorClass::Usage,
            Error::Overflow(_)
            | Error::Separation { .. }
            | Error::SingularHessian
            | Error::CalibrationBracket(_)
            | Error::NoTrainableBatches
            | Error::BootstrapFailures { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
