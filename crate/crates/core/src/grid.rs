//! Sampling grid, dual-polarization waveforms and the DFT convention shared by
//! every other module.
//!
//! DFTs are unnormalized in the forward direction and carry `1/N` on the
//! inverse. Spectra are stored in natural bin order (bin 0 is DC); bins above
//! `N/2` are negative frequencies.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Time/frequency sampling contract.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveformGrid {
    n_samples: usize,
    dt: f64,
    symbol_rate: f64,
    oversampling: usize,
}

impl WaveformGrid {
    /// Grid holding `n_symbols` symbols at `oversampling` samples per symbol.
    pub fn new(n_symbols: usize, symbol_rate: f64, oversampling: usize) -> Result<Self> {
        if oversampling == 0 || n_symbols == 0 {
            return Err(Error::InvalidGrid("empty grid".into()));
        }
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(Error::InvalidGrid(format!("symbol rate {symbol_rate}")));
        }
        let n_samples = n_symbols * oversampling;
        if !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples = {n_samples} is not a power of two"
            )));
        }
        Ok(Self {
            n_samples,
            dt: 1.0 / (symbol_rate * oversampling as f64),
            symbol_rate,
            oversampling,
        })
    }

    /// Grid known only by its sample count and spacing, e.g. when read back
    /// from a waveform file. Treated as one sample per "symbol".
    pub fn from_sampling(n_samples: usize, dt: f64) -> Result<Self> {
        if n_samples == 0 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_samples = {n_samples} is not a power of two"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt = {dt}")));
        }
        Ok(Self { n_samples, dt, symbol_rate: 1.0 / dt, oversampling: 1 })
    }

    /// Same spacing, fewer samples. Used to cut windows out of frames.
    pub fn with_len(&self, n_samples: usize) -> Result<Self> {
        if n_samples == 0 || !n_samples.is_power_of_two() || !n_samples.is_multiple_of(self.oversampling) {
            return Err(Error::InvalidGrid(format!(
                "window of {n_samples} samples does not fit the grid"
            )));
        }
        Ok(Self { n_samples, ..*self })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_symbols(&self) -> usize {
        self.n_samples / self.oversampling
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Frequency spacing between DFT bins in Hz.
    pub fn df(&self) -> f64 {
        1.0 / (self.n_samples as f64 * self.dt)
    }

    /// Signed frequency of bin `k` in Hz.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.n_samples;
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        signed * self.df()
    }

    /// Angular frequencies (rad/s) in natural bin order.
    pub fn omega(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| 2.0 * PI * self.frequency(k)).collect()
    }

    /// Sample instants `n * dt`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|n| n as f64 * self.dt).collect()
    }

    pub(crate) fn same_sampling(&self, other: &WaveformGrid) -> bool {
        self.n_samples == other.n_samples && self.dt == other.dt
    }

    pub(crate) fn ensure_same(&self, other: &WaveformGrid) -> Result<()> {
        if self.same_sampling(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{} samples @ {:e} s vs {} samples @ {:e} s",
                self.n_samples, self.dt, other.n_samples, other.dt
            )))
        }
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// In-place unnormalized forward DFT.
pub fn dft_in_place(buf: &mut [Complex64]) {
    plans(buf.len()).0.process(buf);
}

/// In-place inverse DFT including the `1/N` factor.
pub fn idft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plans(n).1.process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Complex baseband envelope in √W, both polarizations, at distance `z_km`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPolWaveform {
    pub(crate) x_pol: Vec<Complex64>,
    pub(crate) y_pol: Vec<Complex64>,
    pub(crate) grid: WaveformGrid,
    pub(crate) z_km: f64,
}

impl DualPolWaveform {
    pub fn new(
        x_pol: Vec<Complex64>,
        y_pol: Vec<Complex64>,
        grid: WaveformGrid,
        z_km: f64,
    ) -> Result<Self> {
        if x_pol.len() != grid.n_samples() || y_pol.len() != grid.n_samples() {
            return Err(Error::InvalidGrid(format!(
                "polarization lengths {}/{} do not match grid of {}",
                x_pol.len(),
                y_pol.len(),
                grid.n_samples()
            )));
        }
        if !(z_km.is_finite() && z_km >= 0.0) {
            return Err(Error::Config(format!("z_km = {z_km}")));
        }
        let w = Self { x_pol, y_pol, grid, z_km };
        if !w.is_finite() {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(w)
    }

    pub fn zeros(grid: WaveformGrid, z_km: f64) -> Self {
        let n = grid.n_samples();
        Self { x_pol: vec![Complex64::ZERO; n], y_pol: vec![Complex64::ZERO; n], grid, z_km }
    }

    /// Builds a waveform sample by sample from `f(t) -> (x, y)`.
    pub fn from_fn(grid: WaveformGrid, z_km: f64, f: impl Fn(f64) -> (Complex64, Complex64)) -> Self {
        let (x_pol, y_pol) = grid.times().into_iter().map(f).unzip();
        Self { x_pol, y_pol, grid, z_km }
    }

    pub fn x(&self) -> &[Complex64] {
        &self.x_pol
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y_pol
    }

    pub fn grid(&self) -> &WaveformGrid {
        &self.grid
    }

    pub fn z_km(&self) -> f64 {
        self.z_km
    }

    pub fn len(&self) -> usize {
        self.x_pol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_pol.is_empty()
    }

    pub fn with_z(mut self, z_km: f64) -> Self {
        self.z_km = z_km;
        self
    }

    pub fn pols(&self) -> [&[Complex64]; 2] {
        [&self.x_pol, &self.y_pol]
    }

    pub(crate) fn pols_mut(&mut self) -> [&mut Vec<Complex64>; 2] {
        [&mut self.x_pol, &mut self.y_pol]
    }

    pub fn is_finite(&self) -> bool {
        self.x_pol.iter().chain(&self.y_pol).all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Σ(|x|² + |y|²) over all samples.
    pub fn energy(&self) -> f64 {
        self.x_pol.iter().chain(&self.y_pol).map(|v| v.norm_sqr()).sum()
    }

    /// Mean total power over both polarizations, in W.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.pols_mut().into_iter().flatten().for_each(|v| *v *= c);
        out
    }

    /// `self + c·other`; grids must agree.
    pub fn add_scaled(&self, other: &Self, c: Complex64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let mut out = self.clone();
        for (dst, src) in out.pols_mut().into_iter().zip(other.pols()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += c * s);
        }
        Ok(out)
    }

    /// Samples `[start, start + len)` as a waveform on a shorter grid.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::InvalidGrid(format!(
                "window [{start}, {}) exceeds {} samples",
                start + len,
                self.len()
            )));
        }
        Ok(Self {
            x_pol: self.x_pol[start..start + len].to_vec(),
            y_pol: self.y_pol[start..start + len].to_vec(),
            grid: self.grid.with_len(len)?,
            z_km: self.z_km,
        })
    }

    pub fn fft_forward(&self) -> SpectrumView {
        fft_forward(self)
    }
}

/// Frequency-domain view of a [`DualPolWaveform`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumView {
    pub x_pol_freq: Vec<Complex64>,
    pub y_pol_freq: Vec<Complex64>,
    pub grid: WaveformGrid,
    pub z_km: f64,
}

impl SpectrumView {
    pub fn zeros(grid: WaveformGrid, z_km: f64) -> Self {
        let n = grid.n_samples();
        Self { x_pol_freq: vec![Complex64::ZERO; n], y_pol_freq: vec![Complex64::ZERO; n], grid, z_km }
    }

    /// Multiplies both polarizations bin-wise by `factor`.
    pub fn apply(&mut self, factor: &[Complex64]) {
        for pol in [&mut self.x_pol_freq, &mut self.y_pol_freq] {
            pol.iter_mut().zip(factor).for_each(|(s, h)| *s *= h);
        }
    }

    pub fn fft_inverse(&self) -> DualPolWaveform {
        fft_inverse(self)
    }
}

pub fn fft_forward(w: &DualPolWaveform) -> SpectrumView {
    let mut x = w.x_pol.clone();
    let mut y = w.y_pol.clone();
    dft_in_place(&mut x);
    dft_in_place(&mut y);
    SpectrumView { x_pol_freq: x, y_pol_freq: y, grid: w.grid, z_km: w.z_km }
}

pub fn fft_inverse(sv: &SpectrumView) -> DualPolWaveform {
    let mut x = sv.x_pol_freq.clone();
    let mut y = sv.y_pol_freq.clone();
    idft_in_place(&mut x);
    idft_in_place(&mut y);
    DualPolWaveform { x_pol: x, y_pol: y, grid: sv.grid, z_km: sv.z_km }
}

/// Σ|pred − ref|² / Σ|ref|² over both polarizations.
pub fn nmse(pred: &DualPolWaveform, reference: &DualPolWaveform) -> Result<f64> {
    pred.grid.ensure_same(&reference.grid)?;
    let ref_energy = reference.energy();
    if ref_energy == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let err: f64 = pred
        .pols()
        .into_iter()
        .zip(reference.pols())
        .flat_map(|(p, r)| p.iter().zip(r))
        .map(|(p, r)| (p - r).norm_sqr())
        .sum();
    Ok(err / ref_energy)
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

/// Rescales `w` so its mean total power equals `p_dbm`.
pub fn power_dbm_to_amplitude_scale(p_dbm: f64, w: &DualPolWaveform) -> Result<DualPolWaveform> {
    let p = w.mean_power();
    if p == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let gain = (dbm_to_watts(p_dbm) / p).sqrt();
    Ok(w.scaled(Complex64::new(gain, 0.0)))
}
