//! Closed-form linear fiber operator: dispersion plus (optionally) attenuation
//! applied as a per-bin transfer function, and its exact inverse.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DualPolWaveform, WaveformGrid};
use crate::ssfm::FiberParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOperator {
    pub fp: FiberParams,
    length_km: f64,
    pub include_attenuation: bool,
}

impl LinearOperator {
    /// Operator over a non-negative fiber length.
    pub fn new(fp: FiberParams, length_km: f64, include_attenuation: bool) -> Result<Self> {
        if !(length_km.is_finite() && length_km >= 0.0) {
            return Err(Error::Config(format!("operator length {length_km} km")));
        }
        fp.validate()?;
        Ok(Self { fp, length_km, include_attenuation })
    }

    /// The same operator run backwards (negative length).
    pub fn inverse(&self) -> Self {
        Self { length_km: -self.length_km, ..*self }
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn transfer(&self, grid: &WaveformGrid) -> Vec<Complex64> {
        self.fp.linear_transfer(grid, self.length_km, self.include_attenuation)
    }
}

fn apply_length(w: &DualPolWaveform, op: &LinearOperator) -> DualPolWaveform {
    let mut sv = w.fft_forward();
    sv.apply(&op.transfer(w.grid()));
    let out = sv.fft_inverse();
    let z = (w.z_km() + op.length_km).max(0.0);
    out.with_z(z)
}

/// Propagates through the linear channel; advances `z_km` by the length.
pub fn apply_forward(w: &DualPolWaveform, op: &LinearOperator) -> DualPolWaveform {
    apply_length(w, op)
}

/// Undoes [`apply_forward`]: conjugate dispersion phase and attenuation gain.
/// `z_km` moves back by the length, saturating at zero.
pub fn apply_inverse(w: &DualPolWaveform, op: &LinearOperator) -> DualPolWaveform {
    apply_length(w, &op.inverse())
}

/// Per-bin `∂H/∂z / H`, i.e. `iβ₂ω²/2 − α/2` (attenuation only when the
/// operator includes it).
pub fn dz_derivative_factor(op: &LinearOperator, grid: &WaveformGrid) -> Vec<Complex64> {
    grid.omega().into_iter().map(|w| op.fp.linear_rate(w, op.include_attenuation)).collect()
}
