use thiserror::Error;

/// Errors raised anywhere in the reserve pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("event simulation failed at t={time:.4}h: {reason}")]
    Simulation { time: f64, reason: String },

    #[error("forecast failed at t={time:.4}h: {reason}")]
    Forecast { time: f64, reason: String },

    #[error("outstanding supply exhausted at t={time:.4}h")]
    SupplyExhausted { time: f64 },

    #[error("non-finite reserve state at t={time:.4}h")]
    Dynamics { time: f64 },

    #[error("solver failed after {iterations} sweeps: {reason} (last control change {last_change:.3e})")]
    Solver {
        iterations: usize,
        reason: String,
        last_change: f64,
    },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
