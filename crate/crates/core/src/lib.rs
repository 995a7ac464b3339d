//! Dual-polarization fiber channel simulation and neural channel surrogates.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] sampling grid, dual-polarization waveform container, DFT helpers and metrics
//! * [`transmitter`] seeded DP-16QAM WDM waveform generation with RRC shaping
//! * [`ssfm`] split-step Fourier propagation of the Manakov-averaged NLSE
//! * [`linear`] closed-form dispersion/attenuation operator and its inverse
//! * [`net`] bidirectional recurrent surrogate with hand-written backprop and Adam
//! * [`model`] baseline and feature-decoupled channel models built on the surrogate
//! * [`residual`] NLSE residual evaluation for any field and z-derivative
//! * [`dpwf`] the on-disk waveform format

pub mod dpwf;
pub mod error;
pub mod grid;
pub mod linear;
pub mod model;
pub mod net;
pub mod residual;
pub mod rng;
pub mod ssfm;
pub mod transmitter;

pub use error::{Error, Result};
pub use grid::{nmse, DualPolWaveform, SpectrumView, WaveformGrid};
pub use linear::LinearOperator;
pub use model::{ChannelModel, ModelKind};
pub use net::{CellKind, NetConfig, Precision, SurrogateNet};
pub use residual::ResidualReport;
pub use ssfm::{FiberParams, Scheme, SsfmConfig};
pub use transmitter::{SymbolFrame, TxConfig};
