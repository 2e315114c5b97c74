//! Reproducible experiment runner over `heatlift-core`: configuration
//! resolution, dispatch, artifacts and manifests.

pub mod config;
pub mod error;
pub mod manifest;
pub mod runner;

pub use config::{resolve, Experiment, ExperimentConfig, OutputFormat, Overrides};
pub use error::{RunError, RunResult};
pub use manifest::Manifest;
pub use runner::{run, run_experiment, Outcome, RunRecord};
