//! Configuration, verification suites, fixtures and reports for the `dunkl` binary.

pub mod commands;
pub mod config;
pub mod fixtures;
pub mod report;
pub mod suites;

pub use config::{ExperimentConfig, Suite};
pub use report::RunReport;
pub use suites::{execute, run_suite};
