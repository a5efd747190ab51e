use alloc::string::String;

/// Errors raised by the simulator, the workload generator and the agents.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("model domain error: non-positive service time {time} predicted for size {size}")]
    ModelDomain { size: u32, time: f64 },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("episode already terminated")]
    Terminated,
    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
