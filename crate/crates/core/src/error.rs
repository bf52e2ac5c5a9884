use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("non-positive price {value} for {ticker} on {date}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        value: f64,
    },

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("unmapped ticker {0}")]
    UnmappedTicker(String),

    #[error("ticker {0} mapped twice")]
    DuplicateTicker(String),

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("index {index} out of range {lo}..={hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("zero-variance sector {0}")]
    ZeroVariance(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("eigen-solver did not converge at t={0}")]
    EigenNonConvergence(usize),

    #[error("degenerate portfolio: zero variance")]
    DegeneratePortfolio,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True when the failure stems from bad input data or arguments rather
    /// than from a numerical routine.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Malformed { .. }
                | Error::NonPositivePrice { .. }
                | Error::DuplicateDate(_)
                | Error::UnmappedTicker(_)
                | Error::DuplicateTicker(_)
                | Error::InvalidParameter(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
