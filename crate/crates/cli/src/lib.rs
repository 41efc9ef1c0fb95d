//! Command-line driver: line-based configs with sweeps, run orchestration,
//! CSV outputs and a checksummed manifest.

pub mod config;
pub mod expr;
pub mod manifest;
pub mod run;

pub use config::{parse_config, parse_single, RunConfig};
pub use expr::Expression;
pub use manifest::{Csv, RunManifest};
pub use run::{run, Subcommand};
