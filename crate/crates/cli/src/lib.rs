//! Command line front-end for shell-lab experiments: configuration parsing and
//! the subcommands that write CSV and JSON artifacts.

pub mod commands;
pub mod config;

pub use commands::{run, CliError, Options, COMMANDS};
pub use config::{ConfigError, RawConfig, RunConfig};
