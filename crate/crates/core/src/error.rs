use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    #[error("derivative estimator not ready: {have} of {need} samples")]
    NotReady { have: usize, need: usize },

    #[error("trajectory format error: {0}")]
    Format(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
