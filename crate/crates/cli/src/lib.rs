//! Command-line harness for the `onc` binary: scenario configs, policy
//! files, CSV tables and the four subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod policy_file;
pub mod report;

pub use args::{Cli, Command};
pub use config::{ConfigError, ScenarioConfig};
pub use error::CliError;
