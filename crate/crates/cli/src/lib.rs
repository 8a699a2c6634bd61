//! Command-line workflows over the `pomp` library: configuration, CSV
//! ingestion and output, and the simulate, filter, fit, forecast and verify
//! commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod output;
pub mod verify;

pub use error::{CliError, Result};
