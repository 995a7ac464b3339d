use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite sample in {0}")]
    NonFinite(&'static str),
    #[error("degenerate reference: zero energy")]
    DegenerateReference,
    #[error("zero-energy waveform cannot be rescaled")]
    ZeroEnergy,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical blowup at step {step}")]
    NumericalBlowup { step: usize },
    #[error("forward blowup: non-finite activation")]
    ForwardBlowup,
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("fiber parameters of the model tail differ from the data preparation")]
    PhysicsMismatch,
    #[error("bad file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
