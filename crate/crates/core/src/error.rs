//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {budget} (requested {requested}, limit {limit})")]
    ResourceLimit {
        budget: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("ambiguous maximizers within tolerance {tol}: {first} vs {second}")]
    Ambiguity {
        tol: f64,
        first: String,
        second: String,
    },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("protocol declared an error: {0}")]
    Declared(String),

    #[error("{context}: {message}")]
    Io { context: String, message: String },

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn check_budget(budget: &'static str, requested: u128, limit: u128) -> Result<()> {
    if requested > limit {
        Err(Error::ResourceLimit {
            budget,
            requested,
            limit,
        })
    } else {
        Ok(())
    }
}
