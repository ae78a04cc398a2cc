//! Experiment runner for `cofra-core`: TOML configuration, pipelines per
//! experiment kind and deterministic CSV / JSON reports.

pub mod config;
pub mod io;
pub mod report;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{emit_report, Format};
pub use runner::{run_experiment, RunOutput, RunReport};
