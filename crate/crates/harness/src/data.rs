use fdd_core::model::training_target;
use fdd_core::ssfm::propagate;
use fdd_core::transmitter::transmit;
use fdd_core::DualPolWaveform;

use crate::config::ExperimentConfig;
use crate::error::Result;

/// One training example: a transmitted window, the matching target window
/// and the distance label.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: DualPolWaveform,
    pub target: DualPolWaveform,
    pub z_km: f64,
}

/// A transmitted frame kept whole for NLSE-residual monitoring.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorFrame {
    pub tx: DualPolWaveform,
    pub z_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Window>,
    pub monitor: Vec<MonitorFrame>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

pub fn tx_frame(cfg: &ExperimentConfig, seed: u64) -> Result<DualPolWaveform> {
    Ok(transmit(&cfg.tx.with_seed(seed))?.1)
}

/// Training frame `index` (seed `seed + index`).
pub fn train_frame(cfg: &ExperimentConfig, index: u64) -> Result<DualPolWaveform> {
    tx_frame(cfg, cfg.train_seed(index))
}

/// Held-out frame `index` (seed `seed + EVAL_SEED_OFFSET + index`).
pub fn eval_frame(cfg: &ExperimentConfig, index: u64) -> Result<DualPolWaveform> {
    tx_frame(cfg, cfg.eval_seed(index))
}

/// Ground-truth received field after `z_km`.
pub fn simulate(cfg: &ExperimentConfig, w_tx: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
    Ok(propagate(w_tx, &cfg.fiber, z_km, &cfg.ssfm)?)
}

/// Index of frame `f` at training distance `d` in the training seed range.
/// Every (distance, frame) pair gets its own transmitted sequence.
pub fn train_frame_index(cfg: &ExperimentConfig, d: usize, f: usize) -> u64 {
    (d * cfg.n_train_frames + f) as u64
}

/// Generates, propagates, decouples (for `fdd`) and windows the training data.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut windows = Vec::with_capacity(cfg.n_train_frames * cfg.train_distances_km.len() * cfg.windows_per_frame());
    let mut monitor = Vec::new();
    for (d, &z) in cfg.train_distances_km.iter().enumerate() {
        for f in 0..cfg.n_train_frames {
            let tx = train_frame(cfg, train_frame_index(cfg, d, f))?;
            let rx = simulate(cfg, &tx, z)?;
            let target = training_target(cfg.kind, &rx, &cfg.fiber, z)?;
            for k in 0..cfg.windows_per_frame() {
                let start = k * cfg.window_len;
                windows.push(Window {
                    input: tx.window(start, cfg.window_len)?,
                    target: target.window(start, cfg.window_len)?,
                    z_km: z,
                });
            }
            if f < cfg.n_monitor_frames {
                monitor.push(MonitorFrame { tx, z_km: z });
            }
        }
    }
    Ok(Dataset { windows, monitor })
}
