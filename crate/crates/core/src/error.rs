use thiserror::Error;

/// Errors raised by the allocation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("tangent bracket not found between users {first} and {second}: {reason}")]
    BracketNotFound {
        first: usize,
        second: usize,
        reason: String,
    },

    #[error("infeasible target: requested {target}, achievable at most {achievable}")]
    Infeasible { target: f64, achievable: f64 },

    #[error(
        "no convergence after {iterations} iterations (bracket [{lo:e}, {hi:e}], residual {residual:e})"
    )]
    NoConvergence {
        iterations: usize,
        lo: f64,
        hi: f64,
        residual: f64,
    },

    #[error(
        "allocation infeasible: user {user} rate {rate} exceeds the highest mode rate {max_rate}"
    )]
    RateAboveTable {
        user: usize,
        rate: f64,
        max_rate: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
