use std::path::PathBuf;

use thiserror::Error;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {malformed} of {total} lines malformed (first offending lines: {lines:?})")]
    TooManyMalformed {
        path: PathBuf,
        malformed: usize,
        total: usize,
        lines: Vec<usize>,
    },

    #[error("no interactions left after filtering: {0}")]
    EmptyAfterFiltering(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown identifiers in rankings ({} users, {} POIs): users {users:?}, POIs {pois:?}", users.len(), pois.len())]
    UnknownIdentifiers { users: Vec<String>, pois: Vec<String> },

    #[error("user {user}: ranks must be contiguous from 1, got {ranks:?}")]
    NonContiguousRanks { user: String, ranks: Vec<usize> },

    #[error("{model} diverged at step {step}: non-finite parameter")]
    Diverged { model: &'static str, step: usize },

    #[error("{model}: singular normal equations for row {row}")]
    Singular { model: &'static str, row: usize },

    #[error("PF ELBO decreased at iteration {iteration}: {previous} -> {current}")]
    ElboDecrease {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("divergent measure: {0}")]
    DivergentMeasure(String),

    #[error("GeoSoCa requires POI category data; this dataset has none")]
    MissingCategories,

    #[error("unsupported checkpoint: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Diverged { .. }
            | Error::Singular { .. }
            | Error::ElboDecrease { .. }
            | Error::DivergentMeasure(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
