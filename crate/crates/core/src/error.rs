use thiserror::Error;

use crate::data::SubsetKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("column `{0}` is constant (zero variance)")]
    DegenerateColumn(String),

    #[error("column `{column}`: {message}")]
    ColumnType { column: String, message: String },

    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("duplicate player name `{0}`")]
    DuplicatePlayer(String),

    #[error("invalid response for {family}: {message}")]
    InvalidResponse { family: String, message: String },

    #[error("too few observations: n = {n}, but {columns} columns plus intercept")]
    TooFewObservations { n: usize, columns: usize },

    #[error("design is rank deficient; aliased columns: {}", .aliased.join(", "))]
    Singular { aliased: Vec<String> },

    #[error("fit did not converge after {iterations} iterations: {reason}")]
    NonConvergence {
        reason: String,
        iterations: usize,
        /// Best coefficient vector reached (intercept first).
        best_beta: Vec<f64>,
        best_loglik: f64,
        /// Log-likelihood after each iteration.
        trace: Vec<f64>,
    },

    #[error("Kullback-Leibler divergence is infinite: {0}")]
    InfiniteDivergence(String),

    #[error("degenerate run: {0}")]
    DegenerateRun(String),

    #[error("degenerate hurdle: {0} part is empty")]
    DegenerateHurdle(&'static str),

    #[error("zeta undefined: null log-likelihood is zero")]
    UndefinedZeta,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("too many players for {method}: p = {p}, limit {limit}")]
    TooManyPlayers {
        method: &'static str,
        p: usize,
        limit: usize,
    },

    #[error("fit for subset {key} ({players}) failed: {source}")]
    SubsetFit {
        key: SubsetKey,
        players: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{part} part: {source}")]
    Part {
        part: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Unsupported(_) | Error::TooManyPlayers { .. } => {
                ErrorKind::Config
            }
            Error::MissingColumn(_)
            | Error::DegenerateColumn(_)
            | Error::ColumnType { .. }
            | Error::MissingValue { .. }
            | Error::DuplicatePlayer(_)
            | Error::InvalidResponse { .. }
            | Error::TooFewObservations { .. }
            | Error::DegenerateHurdle(_)
            | Error::Csv(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::Singular { .. }
            | Error::NonConvergence { .. }
            | Error::InfiniteDivergence(_)
            | Error::DegenerateRun(_)
            | Error::UndefinedZeta
            | Error::SubsetFit { .. } => ErrorKind::Numerical,
            Error::Part { source, .. } => source.kind(),
        }
    }

    /// The subset whose fit failed, if this error (or a wrapped one) carries it.
    pub fn failing_subset(&self) -> Option<SubsetKey> {
        match self {
            Error::SubsetFit { key, .. } => Some(*key),
            Error::Part { source, .. } => source.failing_subset(),
            _ => None,
        }
    }
}
