//! NLSE residual ("NLSE loss") of a field and its z-derivative:
//!
//! ```text
//! r_p = ∂s_p/∂z + (α/2)·s_p + (iβ₂/2)·∂²s_p/∂t² − i·κ·γ·(|s_x|² + |s_y|²)·s_p
//! ```
//!
//! Time derivatives are spectral on the periodic grid. All terms are per km.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DualPolWaveform;
use crate::ssfm::{propagate, FiberParams, SsfmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Mean of |r| over samples and both polarizations, in √W/km.
    pub mean_abs_residual: f64,
    /// Mean magnitudes of ∂s/∂z, (α/2)s, the dispersion term and the Kerr term.
    pub per_term_norms: [f64; 4],
    pub n_samples: usize,
    pub z_km: f64,
}

/// `∂²s/∂t²` computed as `IDFT((iω)²·DFT(s))` per polarization.
pub fn spectral_d2t(w: &DualPolWaveform) -> DualPolWaveform {
    let omega = w.grid().omega();
    let factor: Vec<Complex64> = omega.iter().map(|o| Complex64::new(-o * o, 0.0)).collect();
    let mut sv = w.fft_forward();
    sv.apply(&factor);
    sv.fft_inverse()
}

/// Per-sample residual field and the four individual terms.
pub fn residual_terms(
    s: &DualPolWaveform,
    ds_dz: &DualPolWaveform,
    fp: &FiberParams,
) -> Result<(DualPolWaveform, [DualPolWaveform; 4])> {
    s.grid().ensure_same(ds_dz.grid())?;
    fp.validate()?;
    let d2t = spectral_d2t(s);
    let half_alpha = fp.alpha_linear() / 2.0;
    let disp = Complex64::new(0.0, fp.beta2_s2_per_km() / 2.0);
    let kerr = fp.kerr();

    let loss = s.scaled(Complex64::new(half_alpha, 0.0));
    let dispersion = d2t.scaled(disp);
    let mut nonlinear = s.clone();
    {
        let [x, y] = nonlinear.pols_mut();
        for (a, b) in x.iter_mut().zip(y.iter_mut()) {
            let rot = Complex64::new(0.0, -kerr * (a.norm_sqr() + b.norm_sqr()));
            *a *= rot;
            *b *= rot;
        }
    }
    let dz = ds_dz.clone().with_z(s.z_km());
    let one = Complex64::new(1.0, 0.0);
    let residual = dz.add_scaled(&loss, one)?.add_scaled(&dispersion, one)?.add_scaled(&nonlinear, one)?;
    Ok((residual, [dz, loss, dispersion, nonlinear]))
}

fn mean_abs(w: &DualPolWaveform) -> f64 {
    let n = 2 * w.len();
    w.x().iter().chain(w.y()).map(|v| v.norm()).sum::<f64>() / n as f64
}

pub fn nlse_residual(s: &DualPolWaveform, ds_dz: &DualPolWaveform, fp: &FiberParams) -> Result<ResidualReport> {
    let (residual, terms) = residual_terms(s, ds_dz, fp)?;
    let report = ResidualReport {
        mean_abs_residual: mean_abs(&residual),
        per_term_norms: [mean_abs(&terms[0]), mean_abs(&terms[1]), mean_abs(&terms[2]), mean_abs(&terms[3])],
        n_samples: s.len(),
        z_km: s.z_km(),
    };
    if !report.mean_abs_residual.is_finite() || report.per_term_norms.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual"));
    }
    Ok(report)
}

/// Residual of the split-step solution itself, with ∂s/∂z from a central
/// difference of two extra propagations at `z ± dz`.
pub fn residual_of_ssfm(
    w_tx: &DualPolWaveform,
    fp: &FiberParams,
    z_km: f64,
    dz_km: f64,
    cfg: &SsfmConfig,
) -> Result<ResidualReport> {
    if !(dz_km > 0.0 && dz_km <= z_km) {
        return Err(Error::Config(format!("need 0 < dz ({dz_km}) <= z ({z_km})")));
    }
    let s = propagate(w_tx, fp, z_km, cfg)?;
    let plus = propagate(w_tx, fp, z_km + dz_km, cfg)?;
    let minus = propagate(w_tx, fp, z_km - dz_km, cfg)?;
    let ds_dz = plus.add_scaled(&minus, Complex64::new(-1.0, 0.0))?.scaled(Complex64::new(0.5 / dz_km, 0.0));
    nlse_residual(&s, &ds_dz, fp)
}

/// Mean |s| over samples and polarizations; the natural scale for residuals.
pub fn field_scale(w: &DualPolWaveform) -> f64 {
    mean_abs(w)
}
