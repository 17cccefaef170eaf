//! File formats, experiment orchestration and the `mihs` command line for
//! [`mihs_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod files;
pub mod mtx;

pub use config::{ExperimentConfig, SolverEntry, SolverName};
pub use error::{BenchError, Result};
pub use experiment::{run_experiment, ExperimentSummary};
