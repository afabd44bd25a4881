//! Experiment harness: TOML configurations, the trial runner that writes
//! metrics, summary and timing tables, a runtime comparison, and SVG plots.

// `!(x > 0)` style checks are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod plot;
pub mod runner;
pub mod runtime;

pub use config::{ExperimentConfig, Method, Solver};
pub use runner::{run_experiment, MetricsRow, RunOutcome, SummaryRow, TimingRow};
pub use runtime::{compare_runtime, RuntimeReport};
