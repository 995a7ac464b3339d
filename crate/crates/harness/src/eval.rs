use std::path::Path;

use fdd_core::residual::{nlse_residual, residual_of_ssfm};
use fdd_core::{ChannelModel, ResidualReport};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{simulate, train_frame_index, tx_frame};
use crate::error::Result;
use crate::metrics::{DistanceRow, MetricsLog};

/// Pooled NMSE of `model` against the simulated channel at `z_km` over the
/// frames with the given seeds: total error energy over total reference energy.
pub fn nmse_on_seeds(model: &ChannelModel, cfg: &ExperimentConfig, z_km: f64, seeds: &[u64]) -> Result<f64> {
    let mut err = 0.0;
    let mut reference = 0.0;
    for &seed in seeds {
        let tx = tx_frame(cfg, seed)?;
        let rx = simulate(cfg, &tx, z_km)?;
        let pred = model.predict(&tx, z_km)?;
        err += pred.x().iter().zip(rx.x()).chain(pred.y().iter().zip(rx.y())).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        reference += rx.energy();
    }
    Ok(err / reference)
}

/// Held-out seeds for evaluation distance number `d`.
pub fn eval_seeds(cfg: &ExperimentConfig, d: usize) -> Vec<u64> {
    (0..cfg.n_eval_frames).map(|f| cfg.eval_seed((d * cfg.n_eval_frames + f) as u64)).collect()
}

/// NMSE at every evaluation distance on fresh held-out frames.
pub fn evaluate(model: &ChannelModel, cfg: &ExperimentConfig) -> Result<Vec<DistanceRow>> {
    cfg.eval_distances_km
        .iter()
        .enumerate()
        .map(|(d, &z)| {
            Ok(DistanceRow { z_km: z, nmse: nmse_on_seeds(model, cfg, z, &eval_seeds(cfg, d))?, in_training_set: cfg.is_training_distance(z) })
        })
        .collect()
}

/// NMSE on the training frames of training distance number `d`.
pub fn training_nmse(model: &ChannelModel, cfg: &ExperimentConfig, d: usize) -> Result<f64> {
    let seeds: Vec<u64> = (0..cfg.n_train_frames).map(|f| cfg.train_seed(train_frame_index(cfg, d, f))).collect();
    nmse_on_seeds(model, cfg, cfg.train_distances_km[d], &seeds)
}

/// Appends evaluation rows to `log` and writes `distances.csv` under `out_dir`.
pub fn evaluate_into(model: &ChannelModel, cfg: &ExperimentConfig, log: &mut MetricsLog, out_dir: Option<&Path>) -> Result<()> {
    for row in evaluate(model, cfg)? {
        log.push_distance(row);
    }
    if let Some(dir) = out_dir {
        log.write_distances_csv(&dir.join("distances.csv"))?;
    }
    Ok(())
}

/// One line of the `residual` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub frame: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub report: ResidualReport,
}

/// NLSE residual per held-out frame at every evaluation distance, of `model`
/// when given and of the split-step solution otherwise.
pub fn residual_sweep(model: Option<&ChannelModel>, cfg: &ExperimentConfig) -> Result<Vec<ResidualRow>> {
    let mut rows = Vec::new();
    for (d, &z) in cfg.eval_distances_km.iter().enumerate() {
        for (f, seed) in eval_seeds(cfg, d).into_iter().enumerate() {
            let tx = tx_frame(cfg, seed)?;
            let report = match model {
                Some(m) => nlse_residual(&m.predict(&tx, z)?, &m.predict_dz(&tx, z, cfg.dz_km)?, m.fiber())?,
                None => residual_of_ssfm(&tx, &cfg.fiber, z, cfg.dz_km.min(z), &cfg.ssfm)?,
            };
            rows.push(ResidualRow { frame: f, seed, report });
        }
    }
    Ok(rows)
}
