//! File formats, the parallel experiment runner and the `gen-en` commands.

pub mod commands;
mod error;
pub mod formats;
pub mod runner;

pub use error::CliError;
