//! Experiment configuration, runners and reports.

pub mod config;
pub mod dsgd;
pub mod invariants;
pub mod plot;
pub mod report;
pub mod runner;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::algorithms::AlgorithmError;
use crate::losses::LossError;
use crate::oracle::OracleError;
use crate::regret::{RegretError, RegretLedger};
use crate::topology::TopologyError;

pub use config::{Algorithm, ConfigError, ExperimentConfig};
pub use runner::{run_experiment, run_horizon, EnsembleResult, RunSummary, SeedRun};
pub use sweep::{k_sweep, SweepReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Regret(#[from] RegretError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A run stopped mid-way; `partial` holds the rounds completed so far.
    #[error("seed {seed} failed at round {round}: {message}")]
    RunFailed {
        seed: u64,
        round: usize,
        message: String,
        partial: Box<RegretLedger>,
    },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> HarnessError {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
