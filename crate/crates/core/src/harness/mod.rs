//! Experiment harness: strict JSON configuration, experiment drivers and
//! artifact output with a hashed manifest.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{load_config, RunConfig};
pub use experiments::{run_experiment, ExperimentOutcome};
pub use output::write_outputs;
