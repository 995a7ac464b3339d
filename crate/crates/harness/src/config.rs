use std::path::Path;

use fdd_core::grid::dbm_to_watts;
use fdd_core::{FiberParams, ModelKind, NetConfig, SsfmConfig, TxConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Offset between the training and evaluation seed ranges.
pub const EVAL_SEED_OFFSET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from `learning_rate` to `min_learning_rate` over all steps.
    Cosine,
}

/// Everything a run depends on. Frame `i` of the training set is generated
/// with seed `seed + i`, frame `i` of the evaluation set with
/// `seed + EVAL_SEED_OFFSET + i`; `tx.seed` is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub kind: ModelKind,
    pub train_distances_km: Vec<f64>,
    pub eval_distances_km: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub min_learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub window_len: usize,
    /// Training frames per distance. Every frame uses a distinct seed.
    pub n_train_frames: usize,
    /// Held-out frames per evaluation distance.
    pub n_eval_frames: usize,
    /// Training frames per distance in the fixed NLSE-residual monitoring batch.
    pub n_monitor_frames: usize,
    pub dz_km: f64,
    /// Save a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    /// Normalize the network's fields by √(launch power) instead of `net.field_scale`.
    pub auto_field_scale: bool,
    pub tx: TxConfig,
    pub fiber: FiberParams,
    pub ssfm: SsfmConfig,
    pub net: NetConfig,
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self {
            seed: 1,
            kind: ModelKind::Fdd,
            train_distances_km: vec![10.0, 20.0, 30.0, 50.0, 70.0],
            eval_distances_km: (1..=10).map(|k| 10.0 * k as f64).collect(),
            epochs: 200,
            batch_size: 1,
            learning_rate: 1e-2,
            lr_schedule: LrSchedule::Cosine,
            min_learning_rate: 0.0,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            window_len: 256,
            n_train_frames: 24,
            n_eval_frames: 2,
            n_monitor_frames: 1,
            dz_km: 0.1,
            checkpoint_every: 0,
            auto_field_scale: true,
            tx: TxConfig::desk(),
            fiber: FiberParams::default(),
            ssfm: SsfmConfig::default(),
            net: NetConfig::default(),
        }
    }

    pub fn paper() -> Self {
        Self {
            tx: TxConfig { n_symbols: 4096, ..TxConfig::paper() },
            window_len: 1024,
            n_train_frames: 50,
            n_eval_frames: 4,
            net: NetConfig { hidden_size: 64, n_layers: 2, ..NetConfig::default() },
            ..Self::desk()
        }
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    pub fn with_kind(&self, kind: ModelKind) -> Self {
        Self { kind, ..self.clone() }
    }

    /// Parses a TOML document on top of `base`: keys present in the document
    /// replace the base values, tables are merged recursively.
    pub fn from_toml_over(base: &Self, text: &str) -> Result<Self> {
        let mut value = toml::Value::try_from(base).map_err(|e| HarnessError::Config(e.to_string()))?;
        let overlay: toml::Value = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        merge(&mut value, overlay);
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(base: &Self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_over(base, &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.tx.validate()?;
        self.fiber.validate()?;
        self.ssfm.validate()?;
        self.net.validate()?;
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if self.train_distances_km.is_empty() || !self.train_distances_km.iter().all(positive) {
            return bad(format!("train distances {:?} must be non-empty and positive", self.train_distances_km));
        }
        if self.eval_distances_km.is_empty() || !self.eval_distances_km.iter().all(positive) {
            return bad(format!("eval distances {:?} must be non-empty and positive", self.eval_distances_km));
        }
        if self.batch_size == 0 || self.n_train_frames == 0 || self.n_eval_frames == 0 || self.n_monitor_frames == 0 {
            return bad("batch_size and frame counts must be >= 1".into());
        }
        if self.n_monitor_frames > self.n_train_frames {
            return bad("n_monitor_frames exceeds n_train_frames".into());
        }
        if !positive(&self.learning_rate) || !(self.min_learning_rate >= 0.0 && self.min_learning_rate <= self.learning_rate) {
            return bad(format!("learning rates {} / {}", self.learning_rate, self.min_learning_rate));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2) && positive(&self.adam_eps)) {
            return bad(format!("adam betas {:?}, eps {}", self.adam_betas, self.adam_eps));
        }
        if !positive(&self.dz_km) {
            return bad(format!("dz_km = {}", self.dz_km));
        }
        let frame = self.tx.grid()?.n_samples();
        if self.window_len == 0 || frame % self.window_len != 0 || !self.window_len.is_power_of_two() {
            return bad(format!("window_len {} must be a power of two dividing the {frame}-sample frame", self.window_len));
        }
        if !self.window_len.is_multiple_of(self.tx.oversampling) {
            return bad(format!("window_len {} is not a whole number of symbols", self.window_len));
        }
        if frame > self.net.max_seq_len {
            return bad(format!("frame of {frame} samples exceeds net.max_seq_len"));
        }
        Ok(())
    }

    /// Samples per generated frame.
    pub fn frame_len(&self) -> usize {
        self.tx.n_symbols * self.tx.oversampling
    }

    pub fn windows_per_frame(&self) -> usize {
        self.frame_len() / self.window_len
    }

    /// The network configuration actually used, with the field scale resolved.
    pub fn net_config(&self) -> NetConfig {
        let mut net = self.net.clone();
        if self.auto_field_scale {
            let p = self.tx.n_channels as f64 * dbm_to_watts(self.tx.power_dbm_per_channel);
            net.field_scale = p.sqrt();
        }
        net
    }

    pub fn is_training_distance(&self, z_km: f64) -> bool {
        self.train_distances_km.iter().any(|d| (d - z_km).abs() < 1e-9)
    }

    pub fn train_seed(&self, index: u64) -> u64 {
        self.seed.wrapping_add(index)
    }

    pub fn eval_seed(&self, index: u64) -> u64 {
        self.seed.wrapping_add(EVAL_SEED_OFFSET).wrapping_add(index)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_are_valid() {
        ExperimentConfig::desk().validate().unwrap();
        ExperimentConfig::paper().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::paper();
        let back = ExperimentConfig::from_toml_over(&ExperimentConfig::desk(), &cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_overlay_keeps_other_fields() {
        let text = "epochs = 3\nkind = \"baseline\"\n[net]\nhidden_size = 8\n[fiber]\ngamma_per_w_km = 0.0\n";
        let cfg = ExperimentConfig::from_toml_over(&ExperimentConfig::desk(), text).unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.kind, ModelKind::Baseline);
        assert_eq!(cfg.net.hidden_size, 8);
        assert_eq!(cfg.net.z_embed_dim, NetConfig::default().z_embed_dim);
        assert_eq!(cfg.fiber.gamma_per_w_km, 0.0);
        assert_eq!(cfg.fiber.beta2_ps2_per_km, FiberParams::default().beta2_ps2_per_km);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let base = ExperimentConfig::desk();
        for text in ["window_len = 300", "batch_size = 0", "train_distances_km = []", "learning_rate = -1.0", "epochs = \"x\"", "[tx]\nn_channels = 2"] {
            assert_eq!(ExperimentConfig::from_toml_over(&base, text).unwrap_err().exit_code(), 2, "{text}");
        }
    }

    #[test]
    fn seed_ranges_are_disjoint() {
        let cfg = ExperimentConfig::desk();
        let n_train = (cfg.n_train_frames * cfg.train_distances_km.len()) as u64;
        assert!(cfg.train_seed(n_train) < cfg.eval_seed(0));
    }

    #[test]
    fn auto_field_scale_tracks_launch_power() {
        let cfg = ExperimentConfig::desk();
        let p = dbm_to_watts(5.0);
        assert!((cfg.net_config().field_scale - p.sqrt()).abs() < 1e-15);
        let fixed = ExperimentConfig { auto_field_scale: false, ..cfg };
        assert_eq!(fixed.net_config().field_scale, fixed.net.field_scale);
    }
}
