//! DP-16QAM WDM transmitter on a periodic grid.
//!
//! Symbols come from a single SplitMix64 stream drawn channel-major, then
//! polarization, then symbol index. Each symbol consumes one `u64`: bits 63..62
//! select the in-phase level and bits 61..60 the quadrature level through the
//! Gray map `00 → -3, 01 → -1, 11 → +1, 10 → +3`, scaled by `1/√10`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, DualPolWaveform, WaveformGrid};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    pub n_channels: usize,
    pub channel_spacing_hz: f64,
    pub symbol_rate: f64,
    pub rolloff: f64,
    pub oversampling: usize,
    pub n_symbols: usize,
    pub power_dbm_per_channel: f64,
    pub seed: u64,
}

impl TxConfig {
    /// Single channel, 256 symbols, 4 samples per symbol.
    pub fn desk() -> Self {
        Self {
            n_channels: 1,
            channel_spacing_hz: 50e9,
            symbol_rate: 30e9,
            rolloff: 0.1,
            oversampling: 4,
            n_symbols: 256,
            power_dbm_per_channel: 5.0,
            seed: 1,
        }
    }

    /// Five 30 GBaud channels on a 50 GHz grid. Eight samples per symbol are
    /// needed so the outer channels stay below Nyquist.
    pub fn paper() -> Self {
        Self { n_channels: 5, oversampling: 8, ..Self::desk() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.n_channels.is_multiple_of(2) {
            return Err(Error::Config(format!("n_channels = {} must be odd", self.n_channels)));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!("rolloff = {} outside [0, 1]", self.rolloff)));
        }
        if !(self.channel_spacing_hz >= 0.0 && self.channel_spacing_hz.is_finite()) {
            return Err(Error::Config("channel spacing must be finite and non-negative".into()));
        }
        if !self.power_dbm_per_channel.is_finite() {
            return Err(Error::Config("launch power must be finite".into()));
        }
        let grid = self.grid()?;
        let outer = self.channel_offset_hz(self.n_channels - 1).abs();
        let edge = outer + (1.0 + self.rolloff) * self.symbol_rate / 2.0;
        if edge >= grid.sample_rate() / 2.0 {
            return Err(Error::Config(format!(
                "outermost channel reaches {:.3} GHz, beyond Nyquist {:.3} GHz",
                edge / 1e9,
                grid.sample_rate() / 2e9
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<WaveformGrid> {
        WaveformGrid::new(self.n_symbols, self.symbol_rate, self.oversampling)
    }

    /// Nominal carrier offset of channel `m` from the band center.
    pub fn channel_offset_hz(&self, m: usize) -> f64 {
        (m as f64 - (self.n_channels as f64 - 1.0) / 2.0) * self.channel_spacing_hz
    }
}

/// Per channel, per polarization symbol sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub channels: Vec<[Vec<Complex64>; 2]>,
}

impl SymbolFrame {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

fn gray_level(bits: u64) -> f64 {
    match bits & 3 {
        0b00 => -3.0,
        0b01 => -1.0,
        0b11 => 1.0,
        _ => 3.0,
    }
}

/// The 16 unit-energy constellation points.
pub fn constellation() -> Vec<Complex64> {
    let s = 1.0 / 10f64.sqrt();
    let levels = [-3.0, -1.0, 1.0, 3.0];
    levels
        .iter()
        .flat_map(|&i| levels.iter().map(move |&q| Complex64::new(i * s, q * s)))
        .collect()
}

pub fn generate_symbols(cfg: &TxConfig) -> SymbolFrame {
    let mut rng = SplitMix64::new(cfg.seed);
    let norm = 1.0 / 10f64.sqrt();
    let mut draw = || {
        let u = rng.next_u64();
        Complex64::new(gray_level(u >> 62), gray_level(u >> 60)) * norm
    };
    let channels = (0..cfg.n_channels)
        .map(|_| {
            let x = (0..cfg.n_symbols).map(|_| draw()).collect();
            let y = (0..cfg.n_symbols).map(|_| draw()).collect();
            [x, y]
        })
        .collect();
    SymbolFrame { channels }
}

/// Root-raised-cosine amplitude response on the grid's bins, unity at DC.
pub fn rrc_response(grid: &WaveformGrid, rolloff: f64) -> Vec<f64> {
    let n = grid.n_samples();
    let n_sym = grid.n_symbols() as f64;
    let lo = (1.0 - rolloff) / 2.0;
    let hi = (1.0 + rolloff) / 2.0;
    (0..n)
        .map(|k| {
            let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            // frequency in units of the symbol rate
            let f = (signed / n_sym).abs();
            let rc = if rolloff == 0.0 {
                match f.partial_cmp(&0.5) {
                    Some(std::cmp::Ordering::Less) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                }
            } else if f <= lo {
                1.0
            } else if f < hi {
                0.5 * (1.0 + (PI / rolloff * (f - lo)).cos())
            } else {
                0.0
            };
            rc.sqrt()
        })
        .collect()
}

fn filter(samples: &mut [Complex64], response: &[f64]) {
    grid::dft_in_place(samples);
    samples.iter_mut().zip(response).for_each(|(s, h)| *s *= h);
    grid::idft_in_place(samples);
}

fn shape_sequence(symbols: &[Complex64], grid: &WaveformGrid, response: &[f64]) -> Vec<Complex64> {
    let os = grid.oversampling();
    let mut up = vec![Complex64::ZERO; grid.n_samples()];
    for (k, s) in symbols.iter().enumerate() {
        up[k * os] = *s;
    }
    filter(&mut up, response);
    up
}

/// Upsamples each channel and filters it with the RRC response.
pub fn rrc_pulse_shape(frame: &SymbolFrame, cfg: &TxConfig) -> Result<Vec<DualPolWaveform>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let response = rrc_response(&grid, cfg.rolloff);
    frame
        .channels
        .iter()
        .map(|[x, y]| {
            if x.len() != cfg.n_symbols || y.len() != cfg.n_symbols {
                return Err(Error::Config("symbol frame length differs from n_symbols".into()));
            }
            DualPolWaveform::new(
                shape_sequence(x, &grid, &response),
                shape_sequence(y, &grid, &response),
                grid,
                0.0,
            )
        })
        .collect()
}

/// Matched filter followed by sampling at symbol centers. The output is
/// rescaled so an ideal channel returns the transmitted symbols.
pub fn matched_filter_symbols(w: &DualPolWaveform, rolloff: f64) -> [Vec<Complex64>; 2] {
    let grid = w.grid();
    let response = rrc_response(grid, rolloff);
    let os = grid.oversampling();
    let gain = os as f64;
    let decimate = |pol: &[Complex64]| {
        let mut buf = pol.to_vec();
        filter(&mut buf, &response);
        buf.iter().step_by(os).map(|v| v * gain).collect()
    };
    [decimate(w.x()), decimate(w.y())]
}

/// Sets each channel to the configured launch power, moves it to its carrier
/// and sums. Carrier offsets are snapped to the nearest DFT bin so every
/// channel stays periodic on the grid.
pub fn wdm_multiplex(channels: &[DualPolWaveform], cfg: &TxConfig) -> Result<DualPolWaveform> {
    cfg.validate()?;
    if channels.len() != cfg.n_channels {
        return Err(Error::Config(format!(
            "{} channel waveforms for {} configured channels",
            channels.len(),
            cfg.n_channels
        )));
    }
    let offsets: Vec<f64> = (0..cfg.n_channels).map(|m| cfg.channel_offset_hz(m)).collect();
    multiplex(channels, &offsets, cfg.power_dbm_per_channel, &cfg.grid()?)
}

/// Power-normalizes, frequency-shifts and sums arbitrary channels.
pub fn multiplex(
    channels: &[DualPolWaveform],
    offsets_hz: &[f64],
    power_dbm_per_channel: f64,
    grid: &WaveformGrid,
) -> Result<DualPolWaveform> {
    let n = grid.n_samples();
    let mut out = DualPolWaveform::zeros(*grid, 0.0);
    for (ch, &offset) in channels.iter().zip(offsets_hz) {
        grid.ensure_same(ch.grid())?;
        let powered = grid::power_dbm_to_amplitude_scale(power_dbm_per_channel, ch)?;
        let bin = (offset / grid.df()).round() as i64;
        let carrier: Vec<Complex64> = (0..n as i64)
            .map(|t| {
                let phase = (bin * t).rem_euclid(n as i64) as f64 / n as f64;
                Complex64::from_polar(1.0, 2.0 * PI * phase)
            })
            .collect();
        for (dst, src) in out.pols_mut().into_iter().zip(powered.pols()) {
            dst.iter_mut().zip(src).zip(&carrier).for_each(|((d, s), c)| *d += s * c);
        }
    }
    Ok(out)
}

/// Symbols plus the multiplexed launch waveform for one frame.
pub fn transmit(cfg: &TxConfig) -> Result<(SymbolFrame, DualPolWaveform)> {
    cfg.validate()?;
    let frame = generate_symbols(cfg);
    let shaped = rrc_pulse_shape(&frame, cfg)?;
    let w = wdm_multiplex(&shaped, cfg)?;
    Ok((frame, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_energy(spec: &[Complex64], grid: &WaveformGrid, lo: f64, hi: f64) -> f64 {
        spec.iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = grid.frequency(*k);
                f >= lo && f <= hi
            })
            .map(|(_, v)| v.norm_sqr())
            .sum()
    }

    #[test]
    fn deterministic_symbols() {
        let cfg = TxConfig::desk();
        assert_eq!(generate_symbols(&cfg), generate_symbols(&cfg));
        assert_ne!(generate_symbols(&cfg), generate_symbols(&cfg.with_seed(2)));
    }

    #[test]
    fn points_on_the_normalized_grid() {
        let pts = constellation();
        let frame = generate_symbols(&TxConfig { n_channels: 3, ..TxConfig::desk() });
        for ch in &frame.channels {
            for s in ch.iter().flatten() {
                assert!(pts.iter().any(|p| (p - s).norm() < 1e-15));
            }
        }
        let mean: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symbol_statistics() {
        let cfg = TxConfig { n_symbols: 50_000, ..TxConfig::desk() };
        let frame = generate_symbols(&cfg);
        let all: Vec<Complex64> = frame.channels[0].iter().flatten().copied().collect();
        assert_eq!(all.len(), 100_000);
        let energy = all.iter().map(|s| s.norm_sqr()).sum::<f64>() / all.len() as f64;
        assert!((energy - 1.0).abs() < 0.01, "{energy}");

        let pts = constellation();
        let n = all.len() as f64;
        let p = 1.0 / 16.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for pt in &pts {
            let count = all.iter().filter(|s| (*s - pt).norm() < 1e-12).count() as f64;
            assert!((count - n * p).abs() < 3.0 * sigma, "{pt}: {count}");
        }
    }

    #[test]
    fn rrc_normalization_and_band_limit() {
        let cfg = TxConfig::desk();
        let grid = cfg.grid().unwrap();
        let h = rrc_response(&grid, 0.1);
        assert!((h[0] - 1.0).abs() < 1e-12);

        let frame = generate_symbols(&cfg);
        let shaped = rrc_pulse_shape(&frame, &cfg).unwrap().remove(0);
        let spec = shaped.fft_forward();
        let total: f64 = spec.x_pol_freq.iter().map(|v| v.norm_sqr()).sum();
        let edge = 1.1 * cfg.symbol_rate / 2.0;
        let outside: f64 = spec
            .x_pol_freq
            .iter()
            .enumerate()
            .filter(|(k, _)| grid.frequency(*k).abs() > edge)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        assert!(outside < 1e-10 * total);
    }

    #[test]
    fn matched_filter_has_zero_isi() {
        for rolloff in [0.0, 0.1, 0.5, 1.0] {
            let cfg = TxConfig { rolloff, ..TxConfig::desk() };
            let frame = generate_symbols(&cfg);
            let shaped = rrc_pulse_shape(&frame, &cfg).unwrap().remove(0);
            let [rx_x, rx_y] = matched_filter_symbols(&shaped, rolloff);
            let [tx_x, tx_y] = &frame.channels[0];
            let err = rx_x.iter().zip(tx_x).chain(rx_y.iter().zip(tx_y)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-6, "rolloff {rolloff}: {err}");
        }
    }

    #[test]
    fn single_channel_is_power_scaled_identity() {
        let cfg = TxConfig::desk();
        let frame = generate_symbols(&cfg);
        let shaped = rrc_pulse_shape(&frame, &cfg).unwrap();
        let mux = wdm_multiplex(&shaped, &cfg).unwrap();
        let expect = grid::power_dbm_to_amplitude_scale(5.0, &shaped[0]).unwrap();
        assert!(mux.x().iter().zip(expect.x()).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!((mux.mean_power() - grid::dbm_to_watts(5.0)).abs() < 1e-15);
    }

    #[test]
    fn channel_powers_add_and_peaks_sit_on_carriers() {
        let cfg = TxConfig { n_channels: 3, n_symbols: 2048, oversampling: 8, ..TxConfig::desk() };
        cfg.validate().unwrap();
        let (_, w) = transmit(&cfg).unwrap();
        let p1 = grid::dbm_to_watts(cfg.power_dbm_per_channel);
        assert!((w.mean_power() / (3.0 * p1) - 1.0).abs() < 1e-3);

        let grid = cfg.grid().unwrap();
        let spec = w.fft_forward();
        let half = cfg.channel_spacing_hz / 2.0;
        let total: f64 = spec.x_pol_freq.iter().map(|v| v.norm_sqr()).sum();
        for m in 0..3 {
            let fm = cfg.channel_offset_hz(m);
            let (num, den) = spec.x_pol_freq.iter().enumerate().fold((0.0, 0.0), |(n, d), (k, v)| {
                let f = grid.frequency(k);
                if (f - fm).abs() < half {
                    (n + f * v.norm_sqr(), d + v.norm_sqr())
                } else {
                    (n, d)
                }
            });
            assert!((num / den - fm).abs() < 0.01 * cfg.channel_spacing_hz, "channel {m}: centroid {}", num / den - fm);
            // guard band between neighbours carries no energy
            let guard_lo = fm + 1.1 * cfg.symbol_rate / 2.0 + grid.df();
            let guard_hi = fm + cfg.channel_spacing_hz - 1.1 * cfg.symbol_rate / 2.0 - grid.df();
            assert!(band_energy(&spec.x_pol_freq, &grid, guard_lo, guard_hi) < 1e-8 * total / 3.0);
        }
    }

    #[test]
    fn two_channel_power_additivity() {
        let cfg = TxConfig { n_channels: 3, n_symbols: 4096, oversampling: 8, ..TxConfig::desk() };
        let grid = cfg.grid().unwrap();
        let frame = generate_symbols(&cfg);
        let shaped = rrc_pulse_shape(&frame, &cfg).unwrap();
        let one = multiplex(&shaped[..1], &[-25e9], 0.0, &grid).unwrap();
        let two = multiplex(&shaped[..2], &[-25e9, 25e9], 0.0, &grid).unwrap();
        assert!((one.mean_power() - 1e-3).abs() < 1e-15);
        assert!((two.mean_power() / (2.0 * one.mean_power()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_aliasing_and_bad_configs() {
        let cfg = TxConfig { n_channels: 5, oversampling: 4, ..TxConfig::desk() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(TxConfig::paper().validate().is_ok());
        assert!(TxConfig { n_channels: 2, ..TxConfig::desk() }.validate().is_err());
        assert!(TxConfig { rolloff: 1.2, ..TxConfig::desk() }.validate().is_err());
    }
}
