//! Bidirectional recurrent channel surrogate.
//!
//! Per time step the network sees `[Re s_x, Im s_x, Re s_y, Im s_y]` divided
//! by `field_scale`, concatenated with a linear embedding of the normalized
//! distance `z / z_ref`. A stack of bidirectional LSTM (or GRU) layers feeds
//! a linear projection back to four reals, which are rescaled by
//! `field_scale` into the two output polarizations.
//!
//! All parameters live in one flat `f64` vector with named row-major views;
//! gradients and Adam moments are stored alongside with the same layout.

mod checkpoint;
mod kernel;
mod layout;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DualPolWaveform;
use crate::rng::SplitMix64;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use kernel::Real;
pub use layout::TensorSpec;

use kernel::{Tape, Work};
use layout::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    BiLstm,
    BiGru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_size: usize,
    pub n_layers: usize,
    pub z_embed_dim: usize,
    pub cell: CellKind,
    pub precision: Precision,
    pub init_seed: u64,
    /// Half-width of the uniform initializer; `1/√hidden_size` when unset.
    #[serde(default)]
    pub init_scale: Option<f64>,
    /// Distance normalization for the z encoding.
    pub z_ref_km: f64,
    /// Field normalization in √W applied on input and undone on output.
    pub field_scale: f64,
    pub max_seq_len: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            n_layers: 1,
            z_embed_dim: 4,
            cell: CellKind::BiLstm,
            precision: Precision::F32,
            init_seed: 7,
            init_scale: None,
            z_ref_km: 100.0,
            field_scale: 1.0,
            max_seq_len: 1 << 16,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.n_layers == 0 || self.z_embed_dim == 0 {
            return Err(Error::Config("hidden_size, n_layers and z_embed_dim must be >= 1".into()));
        }
        if !(self.z_ref_km > 0.0 && self.z_ref_km.is_finite()) {
            return Err(Error::Config(format!("z_ref_km = {}", self.z_ref_km)));
        }
        if !(self.field_scale > 0.0 && self.field_scale.is_finite()) {
            return Err(Error::Config(format!("field_scale = {}", self.field_scale)));
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("init_scale = {s}")));
            }
        }
        Ok(())
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale.unwrap_or(1.0 / (self.hidden_size as f64).sqrt())
    }
}

/// The distance code fed to every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ZEncoding {
    pub z_norm: f64,
    pub embedding: Vec<f64>,
}

enum CachedTape {
    F32(Tape<f32>),
    F64(Tape<f64>),
}

pub struct SurrogateNet {
    cfg: NetConfig,
    layout: Layout,
    params: Vec<f64>,
    grads: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    cache: Option<CachedTape>,
}

impl Clone for SurrogateNet {
    /// Clones weights, gradients and optimizer state; never the cached tape.
    fn clone(&self) -> Self {
        Self {
            cfg: self.cfg.clone(),
            layout: self.layout.clone(),
            params: self.params.clone(),
            grads: self.grads.clone(),
            adam_m: self.adam_m.clone(),
            adam_v: self.adam_v.clone(),
            cache: None,
        }
    }
}

impl std::fmt::Debug for SurrogateNet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurrogateNet").field("cfg", &self.cfg).field("n_params", &self.params.len()).finish()
    }
}

impl SurrogateNet {
    /// Uniform `(−init_scale, init_scale)` initialization from `init_seed`.
    pub fn new(cfg: NetConfig) -> Result<Self> {
        let mut net = Self::zeroed(cfg)?;
        let mut rng = SplitMix64::new(net.cfg.init_seed);
        let s = net.cfg.init_scale();
        net.params.iter_mut().for_each(|p| *p = rng.uniform(-s, s));
        Ok(net)
    }

    pub fn zeroed(cfg: NetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let n = layout.total;
        Ok(Self {
            cfg,
            layout,
            params: vec![0.0; n],
            grads: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            cache: None,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.layout.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.spec(name).map(|t| &self.params[t.range.clone()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.spec(name)?.range.clone();
        Some(&mut self.params[range])
    }

    pub fn tensor_grad(&self, name: &str) -> Option<&[f64]> {
        self.spec(name).map(|t| &self.grads[t.range.clone()])
    }

    pub fn z_encoding(&self, z_km: f64) -> ZEncoding {
        let z_norm = z_km / self.cfg.z_ref_km;
        let w = &self.params[self.layout.z_w.clone()];
        let b = &self.params[self.layout.z_b.clone()];
        ZEncoding { z_norm, embedding: w.iter().zip(b).map(|(w, b)| w * z_norm + b).collect() }
    }

    fn features<F: Real>(&self, w: &DualPolWaveform) -> Result<Vec<F>> {
        if w.len() > self.cfg.max_seq_len {
            return Err(Error::Config(format!(
                "sequence of {} samples exceeds max_seq_len {}",
                w.len(),
                self.cfg.max_seq_len
            )));
        }
        let inv = 1.0 / self.cfg.field_scale;
        let mut out = Vec::with_capacity(4 * w.len());
        for (x, y) in w.x().iter().zip(w.y()) {
            out.extend([F::of(x.re * inv), F::of(x.im * inv), F::of(y.re * inv), F::of(y.im * inv)]);
        }
        Ok(out)
    }

    fn to_waveform<F: Real>(&self, out: &[F], template: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        let s = self.cfg.field_scale;
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::ForwardBlowup);
        }
        let x = out.chunks_exact(4).map(|c| Complex64::new(c[0].f64() * s, c[1].f64() * s)).collect();
        let y = out.chunks_exact(4).map(|c| Complex64::new(c[2].f64() * s, c[3].f64() * s)).collect();
        DualPolWaveform::new(x, y, *template.grid(), z_km.max(0.0)).map_err(|_| Error::ForwardBlowup)
    }

    fn run<F: Real>(&self, w: &DualPolWaveform, z_km: f64) -> Result<(Vec<F>, Tape<F>)> {
        let feats = self.features::<F>(w)?;
        let work = Work::<F>::new(&self.layout, &self.params);
        Ok(kernel::forward(work, &feats, F::of(z_km / self.cfg.z_ref_km)))
    }

    /// Predicted waveform for input `w` at distance `z_km`.
    pub fn forward(&self, w: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        match self.cfg.precision {
            Precision::F32 => {
                let (out, _) = self.run::<f32>(w, z_km)?;
                self.to_waveform(&out, w, z_km)
            }
            Precision::F64 => {
                let (out, _) = self.run::<f64>(w, z_km)?;
                self.to_waveform(&out, w, z_km)
            }
        }
    }

    /// Like [`forward`](Self::forward) but keeps the activations for one
    /// subsequent [`backward`](Self::backward).
    pub fn forward_cached(&mut self, w: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        self.cache = None;
        match self.cfg.precision {
            Precision::F32 => {
                let (out, tape) = self.run::<f32>(w, z_km)?;
                let res = self.to_waveform(&out, w, z_km)?;
                self.cache = Some(CachedTape::F32(tape));
                Ok(res)
            }
            Precision::F64 => {
                let (out, tape) = self.run::<f64>(w, z_km)?;
                let res = self.to_waveform(&out, w, z_km)?;
                self.cache = Some(CachedTape::F64(tape));
                Ok(res)
            }
        }
    }

    /// Accumulates weight gradients given `∂L/∂output` per sample, laid out as
    /// `[∂Re x, ∂Im x, ∂Re y, ∂Im y]` in physical units. Consumes the cache.
    pub fn backward(&mut self, d_output: &[[f64; 4]]) -> Result<()> {
        let tape = self.cache.take().ok_or(Error::NoCachedForward)?;
        let s = self.cfg.field_scale;
        match tape {
            CachedTape::F32(t) => {
                if d_output.len() != tape_len(&t) {
                    return Err(Error::Config("gradient length differs from cached sequence".into()));
                }
                let dy: Vec<f32> = d_output.iter().flatten().map(|g| (g * s) as f32).collect();
                kernel::backward(&t, &self.layout, &dy, &mut self.grads);
            }
            CachedTape::F64(t) => {
                if d_output.len() != tape_len(&t) {
                    return Err(Error::Config("gradient length differs from cached sequence".into()));
                }
                let dy: Vec<f64> = d_output.iter().flatten().map(|g| g * s).collect();
                kernel::backward(&t, &self.layout, &dy, &mut self.grads);
            }
        }
        Ok(())
    }

    /// Central difference `(f(z+dz) − f(z−dz)) / 2dz` of the output in z.
    pub fn d_output_dz(&self, w: &DualPolWaveform, z_km: f64, dz_km: f64) -> Result<DualPolWaveform> {
        central_difference(|z| self.forward(w, z), z_km, dz_km)
    }

    /// One bias-corrected Adam update; `step_index` counts from 1.
    pub fn adam_step(&mut self, lr: f64, betas: (f64, f64), eps: f64, step_index: u64) {
        let (b1, b2) = betas;
        let t = step_index.max(1) as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in self.params.iter_mut().zip(&self.grads).zip(&mut self.adam_m).zip(&mut self.adam_v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// Clears the Adam moments.
    pub fn reset_optimizer(&mut self) {
        self.adam_m.iter_mut().for_each(|v| *v = 0.0);
        self.adam_v.iter_mut().for_each(|v| *v = 0.0);
    }
}

fn tape_len<F>(t: &Tape<F>) -> usize {
    t.len
}

/// `(f(z+dz) − f(z−dz)) / 2dz` for any waveform-valued function of distance.
pub fn central_difference(
    f: impl Fn(f64) -> Result<DualPolWaveform>,
    z_km: f64,
    dz_km: f64,
) -> Result<DualPolWaveform> {
    if !(dz_km > 0.0 && dz_km.is_finite()) {
        return Err(Error::Config(format!("dz_km = {dz_km}")));
    }
    let plus = f(z_km + dz_km)?;
    let minus = f(z_km - dz_km)?;
    Ok(plus.add_scaled(&minus, Complex64::new(-1.0, 0.0))?.scaled(Complex64::new(0.5 / dz_km, 0.0)).with_z(z_km.max(0.0)))
}

/// `[Re x, Im x, Re y, Im y]` per sample.
pub fn waveform_features(w: &DualPolWaveform) -> Vec<[f64; 4]> {
    w.x().iter().zip(w.y()).map(|(x, y)| [x.re, x.im, y.re, y.im]).collect()
}
