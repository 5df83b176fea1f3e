//! Two-mass machine-tool axis with friction and backlash, controlled by a
//! classical P-PI cascade or a model-free iP-iP cascade.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `drivetrain-mfc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod control;
pub mod error;
pub mod linalg;
pub mod plant;
pub mod sim;
pub mod trajectory;
pub mod tuning;

pub use control::{ControllerConfig, ControllerKind, FfConfig, IpGains, PpiGains};
pub use error::{Error, Result};
pub use plant::{PlantParams, WearParams};
pub use sim::{run, RunResult, Scenario};
pub use trajectory::Trajectory;
