//! Experiment driver: config handling, cached datasets and Lie bases, the
//! training families, proposition checks and phase-diagram cuts.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::Context;
pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};
