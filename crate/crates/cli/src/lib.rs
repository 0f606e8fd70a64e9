//! Command-line plumbing for the multi-curve HJM toolkit: configuration files, the market
//! dataset format, CSV reports and the subcommand drivers behind the `mchjm` binary.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::RunConfig;
pub use error::{CliError, Result};
