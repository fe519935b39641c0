//! Experiment runner for the `nck-core` estimators: configuration,
//! per-command scans and report emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod real;
pub mod report;

pub use commands::run;
pub use config::{Command, ExperimentConfig, Format};
pub use error::LabError;
pub use report::Report;
