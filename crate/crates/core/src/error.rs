use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("memory cap exceeded: {what} needs {needed} bytes, cap is {cap}")]
    MemoryCap {
        what: String,
        needed: usize,
        cap: usize,
    },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("time {t} ns outside path domain [0, {end}] ns")]
    TimeOutOfDomain { t: f64, end: f64 },

    #[error("step size underflow at t = {t} ns (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {0} steps")]
    MaxSteps(usize),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("positivity violated: minimum eigenvalue {0:e}")]
    Positivity(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
