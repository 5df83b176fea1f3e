//! Command-line experiments on the two-mass drive-train: single runs,
//! the five-configuration comparison, gain tuning and the Monte Carlo
//! robustness sweep, with CSV/JSON/SVG artifacts.

pub mod commands;
pub mod io;
pub mod scenario;
pub mod svg;

/// Failure classes, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    Tuning(String),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Tuning(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl From<mfc_core::Error> for Failure {
    fn from(e: mfc_core::Error) -> Self {
        use mfc_core::Error;
        match e {
            Error::Diverged { .. } => Failure::Diverged(e.to_string()),
            Error::OptimizationFailed(_) => Failure::Tuning(e.to_string()),
            Error::InvalidParameter { .. } | Error::NotReady { .. } | Error::Format(_) => {
                Failure::Validation(e.to_string())
            }
        }
    }
}
