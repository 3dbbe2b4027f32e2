//! Experiment harness for `balpa-core`: plain-text and LIBSVM file formats,
//! TOML-configured solver races, decentralized runs, trace CSVs and rate
//! slopes.

pub mod config;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod gen;
pub mod io;
pub mod trace;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, ExperimentReport};
