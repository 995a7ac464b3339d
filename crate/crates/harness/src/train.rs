use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use fdd_core::net::waveform_features;
use fdd_core::residual::nlse_residual;
use fdd_core::rng::SplitMix64;
use fdd_core::{ChannelModel, Error as CoreError, SurrogateNet};

use crate::bundle::save_bundle;
use crate::config::{ExperimentConfig, LrSchedule};
use crate::data::{build_dataset, Dataset, MonitorFrame};
use crate::error::{HarnessError, Result};
use crate::metrics::{EpochRow, MetricsLog};

const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4521;

/// Learning rate for optimizer step `k` (from 0) of `total`.
pub fn learning_rate(cfg: &ExperimentConfig, k: usize, total: usize) -> f64 {
    match cfg.lr_schedule {
        LrSchedule::Constant => cfg.learning_rate,
        LrSchedule::Cosine => {
            let frac = if total == 0 { 0.0 } else { k as f64 / total as f64 };
            cfg.min_learning_rate + 0.5 * (cfg.learning_rate - cfg.min_learning_rate) * (1.0 + (PI * frac).cos())
        }
    }
}

/// Window visiting order for `epoch` (from 1).
pub fn epoch_order(cfg: &ExperimentConfig, n: usize, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new((cfg.seed ^ SHUFFLE_SALT).wrapping_add(epoch as u64));
    rng.shuffle(&mut order);
    order
}

/// Mean NLSE residual of `model` over the monitoring frames, with the
/// z-derivative taken from the model itself.
pub fn monitor_residual(model: &ChannelModel, frames: &[MonitorFrame], dz_km: f64) -> Result<f64> {
    let mut total = 0.0;
    for f in frames {
        let s = model.predict(&f.tx, f.z_km)?;
        let ds = model.predict_dz(&f.tx, f.z_km, dz_km)?;
        total += nlse_residual(&s, &ds, model.fiber())?.mean_abs_residual;
    }
    Ok(total / frames.len() as f64)
}

/// Squared error in normalized units and the matching output gradient.
fn window_loss(out: &[[f64; 4]], target: &[[f64; 4]], scale: f64, grad_norm: f64) -> (f64, Vec<[f64; 4]>) {
    let inv = 1.0 / scale;
    let mut sq = 0.0;
    let grad = out
        .iter()
        .zip(target)
        .map(|(o, t)| {
            std::array::from_fn(|k| {
                let e = (o[k] - t[k]) * inv;
                sq += e * e;
                2.0 * e * inv * grad_norm
            })
        })
        .collect();
    (sq, grad)
}

/// MSE of the untrained or trained net over every window, in normalized units.
pub fn dataset_mse(net: &SurrogateNet, data: &Dataset) -> Result<f64> {
    let scale = net.config().field_scale;
    let mut sq = 0.0;
    let mut count = 0usize;
    for w in &data.windows {
        let out = waveform_features(&net.forward(&w.input, w.z_km)?);
        let (s, _) = window_loss(&out, &waveform_features(&w.target), scale, 0.0);
        sq += s;
        count += 4 * out.len();
    }
    Ok(sq / count as f64)
}

fn is_numerical(e: &HarnessError) -> bool {
    matches!(e, HarnessError::Core(CoreError::ForwardBlowup | CoreError::NonFinite(_)))
}

/// Trains a fresh model on `cfg`'s dataset. With `out_dir`, writes
/// `epochs.jsonl`, the final `model` bundle and, every `checkpoint_every`
/// epochs, `checkpoints/epoch_<n>` bundles.
pub fn train(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<(ChannelModel, MetricsLog)> {
    let data = build_dataset(cfg)?;
    train_on(cfg, &data, out_dir)
}

pub fn train_on(cfg: &ExperimentConfig, data: &Dataset, out_dir: Option<&Path>) -> Result<(ChannelModel, MetricsLog)> {
    cfg.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let net = SurrogateNet::new(cfg.net_config())?;
    let mut model = ChannelModel::new(cfg.kind, net, cfg.fiber, &cfg.fiber)?;
    let mut log = MetricsLog::new();
    log.push_epoch(EpochRow {
        epoch: 0,
        train_mse: dataset_mse(model.net(), data)?,
        nlse_loss_mean: monitor_residual(&model, &data.monitor, cfg.dz_km)?,
    })?;

    let n = data.windows.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let scale = model.net().config().field_scale;
    let mut step = 0usize;
    let mut last_good = model.clone();

    for epoch in 1..=cfg.epochs {
        let result = run_epoch(cfg, data, &mut model, epoch, &mut step, total_steps, scale);
        let row = match result {
            Ok(train_mse) if train_mse.is_finite() => {
                let res = monitor_residual(&model, &data.monitor, cfg.dz_km);
                match res {
                    Ok(r) if r.is_finite() => Some(EpochRow { epoch, train_mse, nlse_loss_mean: r }),
                    Ok(_) => None,
                    Err(e) if is_numerical(&e) => None,
                    Err(e) => return Err(e),
                }
            }
            Ok(_) => None,
            Err(e) if is_numerical(&e) => None,
            Err(e) => return Err(e),
        };
        let Some(row) = row else {
            let checkpoint = match out_dir {
                Some(dir) => {
                    let stem = dir.join("last_good");
                    save_bundle(&stem, &last_good)?;
                    log.write_epochs_jsonl(&dir.join("epochs.jsonl"))?;
                    Some(stem)
                }
                None => None,
            };
            return Err(HarnessError::Divergence { epoch, last_good: Box::new(last_good), checkpoint });
        };
        log.push_epoch(row)?;
        last_good = model.clone();
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                let ckpt: PathBuf = dir.join("checkpoints");
                std::fs::create_dir_all(&ckpt)?;
                save_bundle(&ckpt.join(format!("epoch_{epoch:04}")), &model)?;
            }
        }
    }

    if let Some(dir) = out_dir {
        log.write_epochs_jsonl(&dir.join("epochs.jsonl"))?;
        save_bundle(&dir.join("model"), &model)?;
    }
    Ok((model, log))
}

/// One pass over the shuffled windows; returns the epoch's mean squared error.
fn run_epoch(
    cfg: &ExperimentConfig,
    data: &Dataset,
    model: &mut ChannelModel,
    epoch: usize,
    step: &mut usize,
    total_steps: usize,
    scale: f64,
) -> Result<f64> {
    let order = epoch_order(cfg, data.windows.len(), epoch);
    let mut sq = 0.0;
    let mut count = 0usize;
    for batch in order.chunks(cfg.batch_size) {
        let net = model.net_mut();
        net.zero_grad();
        let samples: usize = batch.iter().map(|&i| 4 * data.windows[i].input.len()).sum();
        let grad_norm = 1.0 / samples as f64;
        for &i in batch {
            let w = &data.windows[i];
            let out = waveform_features(&net.forward_cached(&w.input, w.z_km)?);
            let (s, grad) = window_loss(&out, &waveform_features(&w.target), scale, grad_norm);
            if !s.is_finite() {
                return Ok(f64::NAN);
            }
            sq += s;
            count += 4 * out.len();
            net.backward(&grad)?;
        }
        let lr = learning_rate(cfg, *step, total_steps);
        *step += 1;
        net.adam_step(lr, cfg.adam_betas, cfg.adam_eps, *step as u64);
    }
    Ok(sq / count as f64)
}
