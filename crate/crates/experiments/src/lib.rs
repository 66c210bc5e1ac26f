//! Experiment harness comparing hypernetworks with embedding methods.
//!
//! Each experiment reads a [`config::Config`], runs its repetitions (in
//! parallel when the `parallel` feature is on) and returns an
//! [`report::ExperimentReport`] that renders to CSV and SVG.

pub mod analyze;
pub mod assumptions;
pub mod colorization;
pub mod config;
pub mod datasets;
pub mod models;
pub mod report;
pub mod rotation;
pub mod synthetic;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] hypernet::Error),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;
