//! Split-step Fourier propagation of the Manakov-averaged NLSE
//!
//! ```text
//! ∂s/∂z = −(α/2)·s − (iβ₂/2)·∂²s/∂t² + i·κ·γ·(|s_x|² + |s_y|²)·s,   κ = 8/9
//! ```
//!
//! Distances are in km, β₂ is carried in s²/km and γ in 1/(W·km), so every
//! rate in this module is "per km".

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, DualPolWaveform, SpectrumView, WaveformGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    pub alpha_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
    #[serde(default = "FiberParams::default_manakov")]
    pub manakov_factor: f64,
}

impl Default for FiberParams {
    /// Standard single-mode fiber.
    fn default() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            beta2_ps2_per_km: -21.7,
            gamma_per_w_km: 1.3,
            manakov_factor: Self::default_manakov(),
        }
    }
}

impl FiberParams {
    fn default_manakov() -> f64 {
        8.0 / 9.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha_db_per_km, self.beta2_ps2_per_km, self.gamma_per_w_km, self.manakov_factor]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("fiber parameters must be finite".into()));
        }
        if self.alpha_db_per_km < 0.0 || self.gamma_per_w_km < 0.0 {
            return Err(Error::Config("attenuation and nonlinearity must be non-negative".into()));
        }
        if !(self.manakov_factor > 0.0 && self.manakov_factor <= 1.0) {
            return Err(Error::Config(format!("manakov_factor = {} outside (0, 1]", self.manakov_factor)));
        }
        Ok(())
    }

    /// Power attenuation coefficient in 1/km. The only place dB are converted.
    pub fn alpha_linear(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// GVD in s²/km.
    pub fn beta2_s2_per_km(&self) -> f64 {
        self.beta2_ps2_per_km * 1e-24
    }

    /// Effective Kerr coefficient κ·γ in 1/(W·km).
    pub fn kerr(&self) -> f64 {
        self.manakov_factor * self.gamma_per_w_km
    }

    /// Per-km rate of the linear operator at angular frequency `omega`:
    /// `iβ₂ω²/2 − α/2`, the attenuation part only when requested.
    pub fn linear_rate(&self, omega: f64, include_attenuation: bool) -> Complex64 {
        let loss = if include_attenuation { self.alpha_linear() / 2.0 } else { 0.0 };
        Complex64::new(-loss, 0.5 * self.beta2_s2_per_km() * omega * omega)
    }

    /// Per-bin transfer function `exp(rate·length)` on `grid`.
    pub fn linear_transfer(&self, grid: &WaveformGrid, length_km: f64, include_attenuation: bool) -> Vec<Complex64> {
        grid.omega()
            .into_iter()
            .map(|w| (self.linear_rate(w, include_attenuation) * length_km).exp())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Half linear, full nonlinear, half linear.
    Symmetric,
    /// Full linear then full nonlinear.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsfmConfig {
    pub step_km: f64,
    pub scheme: Scheme,
}

impl Default for SsfmConfig {
    fn default() -> Self {
        Self { step_km: 0.1, scheme: Scheme::Symmetric }
    }
}

impl SsfmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_km.is_finite() && self.step_km > 0.0) {
            return Err(Error::Config(format!("step_km = {}", self.step_km)));
        }
        Ok(())
    }

    /// Step lengths covering `span_km`; the last step absorbs any remainder.
    pub fn steps(&self, span_km: f64) -> Vec<f64> {
        if span_km <= 0.0 {
            return Vec::new();
        }
        let full = (span_km / self.step_km - 1e-9).ceil().max(1.0) as usize;
        let mut steps = vec![self.step_km; full];
        let last = span_km - self.step_km * (full - 1) as f64;
        steps[full - 1] = last;
        steps
    }
}

pub fn linear_half_step(sv: &SpectrumView, fp: &FiberParams, h_km: f64) -> SpectrumView {
    let mut out = sv.clone();
    out.apply(&fp.linear_transfer(&sv.grid, h_km, true));
    out
}

fn apply_phase(x: &mut [Complex64], y: &mut [Complex64], kerr_h: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let rot = Complex64::cis(kerr_h * (a.norm_sqr() + b.norm_sqr()));
        *a *= rot;
        *b *= rot;
    }
}

/// Kerr phase rotation over `h_km`; magnitudes are untouched.
pub fn nonlinear_step(w: &DualPolWaveform, fp: &FiberParams, h_km: f64) -> DualPolWaveform {
    let mut out = w.clone();
    let [x, y] = out.pols_mut();
    apply_phase(x, y, fp.kerr() * h_km);
    out
}

struct TransferCache<'a> {
    fp: &'a FiberParams,
    grid: WaveformGrid,
    entries: Vec<(f64, Vec<Complex64>)>,
}

impl TransferCache<'_> {
    fn get(&mut self, length: f64) -> &[Complex64] {
        let idx = match self.entries.iter().position(|(l, _)| *l == length) {
            Some(i) => i,
            None => {
                self.entries.push((length, self.fp.linear_transfer(&self.grid, length, true)));
                self.entries.len() - 1
            }
        };
        &self.entries[idx].1
    }
}

fn multiply(buf: &mut [Complex64], h: &[Complex64]) {
    buf.iter_mut().zip(h).for_each(|(s, f)| *s *= f);
}

/// Propagates `w` over `span_km` of fiber.
pub fn propagate(w: &DualPolWaveform, fp: &FiberParams, span_km: f64, cfg: &SsfmConfig) -> Result<DualPolWaveform> {
    fp.validate()?;
    cfg.validate()?;
    if !(span_km.is_finite() && span_km >= 0.0) {
        return Err(Error::Config(format!("span_km = {span_km}")));
    }
    let steps = cfg.steps(span_km);
    let mut out = w.clone();
    out.z_km = w.z_km + span_km;
    if steps.is_empty() {
        return Ok(out);
    }
    let mut cache = TransferCache { fp, grid: w.grid, entries: Vec::new() };
    let kerr = fp.kerr();
    let [x, y] = out.pols_mut();

    match cfg.scheme {
        Scheme::Symmetric => {
            // adjacent half steps are merged: L(h0/2) N(h0) L((h0+h1)/2) N(h1) ... L(hn/2)
            grid::dft_in_place(x);
            grid::dft_in_place(y);
            let h = cache.get(steps[0] / 2.0);
            multiply(x, h);
            multiply(y, h);
            for (i, &step) in steps.iter().enumerate() {
                grid::idft_in_place(x);
                grid::idft_in_place(y);
                apply_phase(x, y, kerr * step);
                if !x.iter().chain(y.iter()).all(|v| v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NumericalBlowup { step: i });
                }
                grid::dft_in_place(x);
                grid::dft_in_place(y);
                let next = steps.get(i + 1).copied().unwrap_or(0.0);
                let h = cache.get((step + next) / 2.0);
                multiply(x, h);
                multiply(y, h);
            }
            grid::idft_in_place(x);
            grid::idft_in_place(y);
        }
        Scheme::Asymmetric => {
            for (i, &step) in steps.iter().enumerate() {
                grid::dft_in_place(x);
                grid::dft_in_place(y);
                let h = cache.get(step);
                multiply(x, h);
                multiply(y, h);
                grid::idft_in_place(x);
                grid::idft_in_place(y);
                apply_phase(x, y, kerr * step);
                if !x.iter().chain(y.iter()).all(|v| v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NumericalBlowup { step: i });
                }
            }
        }
    }
    Ok(out)
}
