//! Scenario files, run artifacts and the commands behind the `hinf-lab`
//! binary.

pub mod artifacts;
pub mod commands;
mod error;
pub mod scenario_file;

pub use error::{exit, CliError};
