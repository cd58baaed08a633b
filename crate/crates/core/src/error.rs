use std::io;

use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trace")]
    EmptyTrace,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: inconsistent format (timestamped and bare records mixed)")]
    InconsistentFormat { line: usize },

    #[error("all {lines} data lines are malformed")]
    AllMalformed { lines: usize },

    #[error("routing table contains no valid prefixes ({rejected} lines rejected)")]
    EmptyTable { rejected: usize },

    #[error("no packet matched any prefix ({unmatched} unmatched)")]
    NoMatches { unmatched: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
