use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    /// Mean squared error over the epoch's windows, in units of `field_scale²`.
    pub train_mse: f64,
    /// Mean NLSE residual of the composite model on the monitoring frames.
    pub nlse_loss_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub z_km: f64,
    pub nmse: f64,
    pub in_training_set: bool,
}

/// Append-only training and evaluation record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    epochs: Vec<EpochRow>,
    distances: Vec<DistanceRow>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epochs(&self) -> &[EpochRow] {
        &self.epochs
    }

    pub fn distances(&self) -> &[DistanceRow] {
        &self.distances
    }

    /// Appends an epoch row; epoch indices must increase strictly.
    pub fn push_epoch(&mut self, row: EpochRow) -> Result<()> {
        if let Some(last) = self.epochs.last() {
            if row.epoch <= last.epoch {
                return Err(HarnessError::Config(format!("epoch {} logged after {}", row.epoch, last.epoch)));
            }
        }
        self.epochs.push(row);
        Ok(())
    }

    pub fn push_distance(&mut self, row: DistanceRow) {
        self.distances.push(row);
    }

    pub fn last_epoch(&self) -> Option<&EpochRow> {
        self.epochs.last()
    }

    pub fn write_epochs_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for row in &self.epochs {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_distances_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path)?;
        for row in &self.distances {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn read_epochs_jsonl(path: &Path) -> Result<Vec<EpochRow>> {
    let mut rows = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}

pub fn read_distances_csv(path: &Path) -> Result<Vec<DistanceRow>> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_path(path)?.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
