//! Experiment runner and file tools around the `macomss` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use experiment::{run_experiment, ExperimentReport};
