//! Command-line front end: configuration, subcommands and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Cli, Command, Report};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
