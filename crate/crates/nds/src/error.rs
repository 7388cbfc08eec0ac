//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("state outside the model domain: {0}")]
    OutOfDomain(String),

    #[error("driver is not invertible: {0}")]
    NotInvertible(&'static str),

    #[error("precision budget exceeded: {0}")]
    PrecisionBudget(String),

    #[error("step budget exceeded: requested {requested}, limit {limit}")]
    StepBudget { requested: u128, limit: u128 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
