//! The two channel models under comparison.
//!
//! * `Baseline`: the surrogate maps `(s_tx, z)` straight to the received field.
//! * `Fdd`: the surrogate maps `(s_tx, z)` to the received field with the
//!   linear channel removed, and the closed-form linear operator over `z` is
//!   cascaded at its output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DualPolWaveform;
use crate::linear::{apply_forward, apply_inverse, dz_derivative_factor, LinearOperator};
use crate::net::SurrogateNet;
use crate::ssfm::FiberParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Fdd,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Fdd => "fdd",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(ModelKind::Baseline),
            "fdd" => Ok(ModelKind::Fdd),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

/// A learned map from a transmitted waveform and a distance to a waveform.
pub trait Surrogate {
    fn forward(&self, w: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform>;
    fn d_output_dz(&self, w: &DualPolWaveform, z_km: f64, dz_km: f64) -> Result<DualPolWaveform>;
    fn z_ref_km(&self) -> f64;
}

impl Surrogate for SurrogateNet {
    fn forward(&self, w: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        SurrogateNet::forward(self, w, z_km)
    }

    fn d_output_dz(&self, w: &DualPolWaveform, z_km: f64, dz_km: f64) -> Result<DualPolWaveform> {
        SurrogateNet::d_output_dz(self, w, z_km, dz_km)
    }

    fn z_ref_km(&self) -> f64 {
        self.config().z_ref_km
    }
}

#[derive(Debug, Clone)]
pub struct ChannelModel<N = SurrogateNet> {
    kind: ModelKind,
    net: N,
    fp: FiberParams,
}

impl<N: Surrogate> ChannelModel<N> {
    /// `tail_fp` drives the cascaded linear operator, `data_fp` is the physics
    /// the training targets were built with. They must be identical.
    pub fn new(kind: ModelKind, net: N, tail_fp: FiberParams, data_fp: &FiberParams) -> Result<Self> {
        tail_fp.validate()?;
        if tail_fp != *data_fp {
            return Err(Error::PhysicsMismatch);
        }
        Ok(Self { kind, net, fp: tail_fp })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn net(&self) -> &N {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut N {
        &mut self.net
    }

    pub fn into_net(self) -> N {
        self.net
    }

    pub fn fiber(&self) -> &FiberParams {
        &self.fp
    }

    pub fn z_ref_km(&self) -> f64 {
        self.net.z_ref_km()
    }

    fn tail(&self, z_km: f64) -> Result<LinearOperator> {
        LinearOperator::new(self.fp, z_km, true)
    }

    /// Predicted received waveform after `z_km`.
    pub fn predict(&self, w_tx: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        if !(z_km >= 0.0 && z_km.is_finite()) {
            return Err(Error::Config(format!("z_km = {z_km}")));
        }
        let out = self.net.forward(&w_tx.clone().with_z(0.0), z_km)?;
        match self.kind {
            ModelKind::Baseline => Ok(out),
            ModelKind::Fdd => Ok(apply_forward(&out.with_z(0.0), &self.tail(z_km)?)),
        }
    }

    /// `∂ predict / ∂z`. For `Fdd` the linear tail is differentiated exactly
    /// by the product rule in the frequency domain, `H·∂Ŝ + (∂H/∂z)·Ŝ`; only
    /// the surrogate term uses a central difference.
    pub fn predict_dz(&self, w_tx: &DualPolWaveform, z_km: f64, dz_km: f64) -> Result<DualPolWaveform> {
        let w = w_tx.clone().with_z(0.0);
        let d_net = self.net.d_output_dz(&w, z_km, dz_km)?;
        match self.kind {
            ModelKind::Baseline => Ok(d_net),
            ModelKind::Fdd => {
                let op = self.tail(z_km)?;
                let grid = *w.grid();
                let h = op.transfer(&grid);
                let rate = dz_derivative_factor(&op, &grid);
                let s_hat = self.net.forward(&w, z_km)?.fft_forward();
                let mut total = d_net.fft_forward();
                let pols = [(&mut total.x_pol_freq, &s_hat.x_pol_freq), (&mut total.y_pol_freq, &s_hat.y_pol_freq)];
                for (acc, s) in pols {
                    for ((a, s), (h, r)) in acc.iter_mut().zip(s).zip(h.iter().zip(&rate)) {
                        *a = h * (*a + r * s);
                    }
                }
                Ok(total.fft_inverse().with_z(z_km))
            }
        }
    }
}

/// The waveform a model of `kind` is trained to reproduce from `w_rx`, the
/// received field after `z_km`.
pub fn training_target(kind: ModelKind, w_rx: &DualPolWaveform, fp: &FiberParams, z_km: f64) -> Result<DualPolWaveform> {
    match kind {
        ModelKind::Baseline => Ok(w_rx.clone()),
        ModelKind::Fdd => Ok(apply_inverse(w_rx, &LinearOperator::new(*fp, z_km, true)?).with_z(z_km)),
    }
}
