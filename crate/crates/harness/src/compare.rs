use std::path::Path;

use fdd_core::ModelKind;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::eval::evaluate_into;
use crate::metrics::MetricsLog;
use crate::train::train;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub z_km: f64,
    pub nmse_a: f64,
    pub nmse_b: f64,
    pub in_training_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub kind_a: ModelKind,
    pub kind_b: ModelKind,
    pub final_nlse_loss_a: f64,
    pub final_nlse_loss_b: f64,
    pub final_train_mse_a: f64,
    pub final_train_mse_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub summary: CompareSummary,
    pub log_a: MetricsLog,
    pub log_b: MetricsLog,
}

/// Sub-directory names for the two runs.
pub fn run_dirs(a: ModelKind, b: ModelKind) -> (String, String) {
    (format!("a_{a}"), format!("b_{b}"))
}

/// Trains and evaluates two configurations that differ only in model kind
/// on identical data. The runs are independent and execute concurrently.
///
/// With `out_dir`, each run writes its artifacts into its own sub-directory
/// and the pairwise table goes to `compare.csv` and `compare_summary.json`.
pub fn compare(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Comparison> {
    if cfg_a.with_kind(cfg_b.kind) != *cfg_b {
        return Err(HarnessError::Config("compared configurations may differ only in `kind`".into()));
    }
    let (name_a, name_b) = run_dirs(cfg_a.kind, cfg_b.kind);
    let dir_a = out_dir.map(|d| d.join(&name_a));
    let dir_b = out_dir.map(|d| d.join(&name_b));
    let run = |cfg: &ExperimentConfig, dir: Option<&Path>| -> Result<MetricsLog> {
        let (model, mut log) = train(cfg, dir)?;
        evaluate_into(&model, cfg, &mut log, dir)?;
        Ok(log)
    };
    let (log_a, log_b) = std::thread::scope(|s| {
        let a = s.spawn(|| run(cfg_a, dir_a.as_deref()));
        let b = run(cfg_b, dir_b.as_deref());
        (a.join().expect("training thread panicked"), b)
    });
    let (log_a, log_b) = (log_a?, log_b?);

    let rows: Vec<CompareRow> = log_a
        .distances()
        .iter()
        .zip(log_b.distances())
        .map(|(a, b)| CompareRow { z_km: a.z_km, nmse_a: a.nmse, nmse_b: b.nmse, in_training_set: a.in_training_set })
        .collect();
    let last_a = log_a.last_epoch().expect("epoch 0 is always logged");
    let last_b = log_b.last_epoch().expect("epoch 0 is always logged");
    let summary = CompareSummary {
        kind_a: cfg_a.kind,
        kind_b: cfg_b.kind,
        final_nlse_loss_a: last_a.nlse_loss_mean,
        final_nlse_loss_b: last_b.nlse_loss_mean,
        final_train_mse_a: last_a.train_mse,
        final_train_mse_b: last_b.train_mse,
    };
    if let Some(dir) = out_dir {
        let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
        std::fs::write(dir.join("compare_summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(Comparison { rows, summary, log_a, log_b })
}
