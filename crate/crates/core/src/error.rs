use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pulses `{first}` and `{second}` overlap")]
    Overlap { first: String, second: String },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("time {t_us} us lies outside the simulated range [0, {end_us}] us")]
    OutOfRange { t_us: f64, end_us: f64 },

    #[error("echo efficiency is undefined for a zero data amplitude")]
    UndefinedEfficiency,

    #[error("fit undefined: {0}")]
    FitUndefined(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
