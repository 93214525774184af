use chrono::NaiveDateTime;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Runtime,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Data => "data",
            ErrorCategory::Runtime => "runtime",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),
    #[error("gap in hourly grid: first missing hour is {missing}")]
    GridGap { missing: NaiveDateTime },
    #[error("non-finite value in column `{column}` at {timestamp}")]
    NonFinite {
        column: String,
        timestamp: NaiveDateTime,
    },
    #[error("no observations in hour bucket starting {0}")]
    EmptyBucket(NaiveDateTime),
    #[error("irregular sub-hourly step: {0}")]
    IrregularStep(String),
    #[error("cannot parse `{value}` in column `{column}`: {reason}")]
    Parse {
        column: String,
        value: String,
        reason: String,
    },
    #[error("series too short: need at least {needed} hours, have {available}")]
    TooShort { needed: usize, available: usize },
    #[error("series are not aligned on the same hourly grid: {0}")]
    Misaligned(String),
    #[error("{0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(f64),
    #[error("normal equations are singular even with ridge regularization")]
    RankDeficient,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } => ErrorCategory::Config,
            Error::MissingColumn(_)
            | Error::DuplicateTimestamp(_)
            | Error::GridGap { .. }
            | Error::NonFinite { .. }
            | Error::EmptyBucket(_)
            | Error::IrregularStep(_)
            | Error::Parse { .. }
            | Error::TooShort { .. }
            | Error::Misaligned(_)
            | Error::Data(_)
            | Error::Csv(_) => ErrorCategory::Data,
            Error::Fold { source, .. } => source.category(),
            _ => ErrorCategory::Runtime,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
