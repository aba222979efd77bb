//! Experiment runner behind the `geoclose` binary.
//!
//! [`experiments::run`] turns an [`config::ExperimentConfig`] into a [`report::Report`]
//! whose rows carry every checked inequality with its margin.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod plot;
pub mod report;

use geoclose::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
