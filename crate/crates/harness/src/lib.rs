//! Experiment harness: dataset generation, training, evaluation sweeps and
//! the baseline-versus-decoupled comparison, plus the `fdd` command line.

pub mod bundle;
pub mod cli;
pub mod compare;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod train;

pub use compare::{compare, Comparison};
pub use config::{ExperimentConfig, LrSchedule, Profile};
pub use data::{build_dataset, Dataset};
pub use error::{HarnessError, Result};
pub use eval::evaluate;
pub use metrics::{DistanceRow, EpochRow, MetricsLog};
pub use train::train;
