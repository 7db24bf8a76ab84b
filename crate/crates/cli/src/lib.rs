//! Experiment harness: JSON experiment configs, parallel execution of
//! (method, task, seed) cells with resumable on-disk records, and CSV
//! exports of the evaluation metrics.

pub mod commands;
pub mod config;
pub mod export;

pub use commands::{Experiment, RunSummary};
pub use config::ExperimentConfig;
