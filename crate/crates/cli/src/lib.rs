//! Experiment runner: configuration, the run/sweep/compare protocols and
//! their CSV and SVG artifacts.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod selftest;
pub mod svg;

pub use config::{ExperimentConfig, Scheme};
pub use error::{CliError, CliResult};
pub use experiment::{compare_throughput, run, sweep_users};
