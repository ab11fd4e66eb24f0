//! Command-line front end for the deformed Gaudin toolkit: configuration,
//! experiment drivers, output files and the acceptance suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod verify;

pub use error::{CliError, CliResult};
