//! Experiment driver: configuration, method comparison across horizons,
//! confidence-region traces and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;

pub use config::ExperimentConfig;
pub use experiment::{run_compare, run_regions, run_solve, CompareOptions};
