use std::io;
use std::path::PathBuf;

use fdd_core::{ChannelModel, Error as CoreError};

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    /// The training loss went non-finite. `last_good` is the model at the end
    /// of the last finite epoch, also written to `checkpoint` when an output
    /// directory was given.
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize, last_good: Box<ChannelModel>, checkpoint: Option<PathBuf> },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(e) => match e {
                CoreError::Config(_)
                | CoreError::InvalidGrid(_)
                | CoreError::GridMismatch(_)
                | CoreError::PhysicsMismatch => 2,
                CoreError::NumericalBlowup { .. }
                | CoreError::ForwardBlowup
                | CoreError::NonFinite(_)
                | CoreError::DegenerateReference
                | CoreError::ZeroEnergy => 3,
                _ => 1,
            },
            HarnessError::Divergence { .. } => 3,
            _ => 1,
        }
    }
}
