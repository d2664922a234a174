//! Command-line driver: design and config files, the `place`, `verify`,
//! `spectrum` and `flow` subcommands, and their CSV, JSON and SVG outputs.

pub mod commands;
pub mod error;
pub mod io;
pub mod svg;
pub mod verify;

pub use commands::{run, Cli, Command};
pub use error::{CliError, Result};
