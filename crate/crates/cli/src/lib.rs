//! Experiment driver for the `rglm` solvers: JSON configs, seeded instance
//! generation, parallel runs over seeds and CSV outputs.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod presets;
pub mod report;

pub use config::{ExperimentConfig, SweepConfig};
pub use error::{CliError, Result};
