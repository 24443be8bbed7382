//! Batch harness behind the `interpreg` binary: configuration, output files
//! and the subcommands.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::RunSummary;
pub use config::ExperimentConfig;
pub use output::{config_hash, Output};
