use thiserror::Error;

/// Errors raised across the simulation, solver and certification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("moment {0} is not present in the moment matrix at this hierarchy level")]
    MissingMoment(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("data integrity error: {0}")]
    DataIntegrity(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
