use std::path::PathBuf;

use chrono::NaiveDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing value for {variable} on {date}")]
    MissingValue { date: NaiveDate, variable: &'static str },

    #[error("negative value {value} for {variable} on {date}")]
    NegativeValue {
        date: NaiveDate,
        variable: &'static str,
        value: f64,
    },

    #[error("daily record does not cover {0}")]
    IncompleteSpan(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("degenerate perfect fit: sum of squared errors is zero")]
    DegeneratePerfectFit,

    #[error("degenerate chains: within-chain covariance is singular")]
    DegenerateChains,

    #[error("degenerate benchmark: benchmark interval score is zero")]
    DegenerateBenchmark,

    #[error("no chain initial point is feasible")]
    InfeasibleStart,

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("quantile regression objective is unbounded")]
    Unbounded,

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("error model for sister {sister} failed: {source}")]
    Sister {
        sister: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

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
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
