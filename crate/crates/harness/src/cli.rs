use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fdd_core::dpwf;
use fdd_core::model::training_target;
use fdd_core::ModelKind;
use serde::Serialize;

use crate::bundle::load_bundle;
use crate::compare::compare;
use crate::config::{ExperimentConfig, Profile};
use crate::data::{build_dataset, simulate, train_frame, train_frame_index, tx_frame};
use crate::error::{HarnessError, Result};
use crate::eval::{evaluate_into, residual_sweep, ResidualRow};
use crate::metrics::MetricsLog;
use crate::train::train;

#[derive(Debug, Parser)]
#[command(name = "fdd", about = "Fiber channel simulation and neural channel surrogates")]
pub struct Cli {
    /// TOML file layered over the selected profile.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the training frames, received fields and targets as DPWF files.
    GenerateData,
    /// Propagate a waveform (or a freshly generated frame) through the fiber.
    Simulate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        distance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Remove the linear channel from a received waveform.
    Decouple {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        distance: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a model; writes epochs.jsonl and the model bundle.
    Train,
    /// NMSE sweep over the evaluation distances; writes distances.csv.
    Evaluate {
        /// Model bundle stem; defaults to `<out-dir>/model`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// NLSE residual per held-out frame of a model, or of the split-step
    /// solution without `--model`; writes residual.jsonl and residual.csv.
    Residual {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and evaluate baseline and fdd on identical data.
    Compare,
}

pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = ExperimentConfig::profile(cli.profile);
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(&base, path)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::GenerateData => generate_data(&cfg, out),
        Command::Simulate { input, distance, output } => {
            let tx = match input {
                Some(p) => dpwf::load(p, None)?,
                None => tx_frame(&cfg, cfg.seed)?,
            };
            let rx = simulate(&cfg, &tx, *distance)?;
            let path = output.clone().unwrap_or_else(|| out.join(format!("rx_z{distance}.dpwf")));
            dpwf::save(&path, &rx)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Decouple { input, distance, output } => {
            let rx = dpwf::load(input, None)?;
            let target = training_target(ModelKind::Fdd, &rx, &cfg.fiber, *distance)?;
            let path = output.clone().unwrap_or_else(|| out.join(format!("decoupled_z{distance}.dpwf")));
            dpwf::save(&path, &target)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Train => {
            std::fs::write(out.join("config.toml"), cfg.to_toml())?;
            let (_, log) = train(&cfg, Some(out))?;
            if let Some(last) = log.last_epoch() {
                println!("epoch {} train_mse {:e} nlse_loss {:e}", last.epoch, last.train_mse, last.nlse_loss_mean);
            }
            Ok(())
        }
        Command::Evaluate { model } => {
            let stem = model.clone().unwrap_or_else(|| out.join("model"));
            let m = load_bundle(&stem, Some(&cfg.fiber))?;
            let mut log = MetricsLog::new();
            evaluate_into(&m, &cfg, &mut log, Some(out))?;
            for row in log.distances() {
                println!("z {:>6} km  nmse {:e}{}", row.z_km, row.nmse, if row.in_training_set { "  (trained)" } else { "" });
            }
            Ok(())
        }
        Command::Residual { model } => {
            let m = model.as_ref().map(|p| load_bundle(p, Some(&cfg.fiber))).transpose()?;
            let rows = residual_sweep(m.as_ref(), &cfg)?;
            write_residuals(&rows, out)?;
            let mean = rows.iter().map(|r| r.report.mean_abs_residual).sum::<f64>() / rows.len() as f64;
            println!("mean NLSE residual over {} frames: {mean:e}", rows.len());
            Ok(())
        }
        Command::Compare => {
            let c = compare(&cfg.with_kind(ModelKind::Baseline), &cfg.with_kind(ModelKind::Fdd), Some(out))?;
            println!("{:>8} {:>14} {:>14}", "z_km", "baseline", "fdd");
            for r in &c.rows {
                println!("{:>8} {:>14.4e} {:>14.4e}", r.z_km, r.nmse_a, r.nmse_b);
            }
            println!("final NLSE loss: baseline {:e}, fdd {:e}", c.summary.final_nlse_loss_a, c.summary.final_nlse_loss_b);
            Ok(())
        }
    }
}

fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let dir = out.join("data");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
    manifest.write_record(["frame", "seed", "z_km", "tx", "rx", "target"])?;
    for (d, &z) in cfg.train_distances_km.iter().enumerate() {
        for f in 0..cfg.n_train_frames {
            let index = train_frame_index(cfg, d, f);
            let tx = train_frame(cfg, index)?;
            let rx = simulate(cfg, &tx, z)?;
            let target = training_target(cfg.kind, &rx, &cfg.fiber, z)?;
            let names = [format!("tx_{index:05}.dpwf"), format!("rx_{index:05}.dpwf"), format!("target_{index:05}.dpwf")];
            dpwf::save(dir.join(&names[0]), &tx)?;
            dpwf::save(dir.join(&names[1]), &rx)?;
            dpwf::save(dir.join(&names[2]), &target)?;
            manifest.write_record([index.to_string(), cfg.train_seed(index).to_string(), z.to_string(), names[0].clone(), names[1].clone(), names[2].clone()])?;
        }
    }
    manifest.flush()?;
    let data = build_dataset(cfg)?;
    println!("wrote {} frames ({} training windows) to {}", cfg.n_train_frames * cfg.train_distances_km.len(), data.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
struct Aggregate {
    aggregate: bool,
    n_sequences: usize,
    mean_abs_residual: f64,
}

fn write_residuals(rows: &[ResidualRow], out: &Path) -> Result<()> {
    let mut jsonl = BufWriter::new(File::create(out.join("residual.jsonl"))?);
    for row in rows {
        serde_json::to_writer(&mut jsonl, row)?;
        jsonl.write_all(b"\n")?;
    }
    let mean = rows.iter().map(|r| r.report.mean_abs_residual).sum::<f64>() / rows.len().max(1) as f64;
    serde_json::to_writer(&mut jsonl, &Aggregate { aggregate: true, n_sequences: rows.len(), mean_abs_residual: mean })?;
    jsonl.write_all(b"\n")?;
    jsonl.flush()?;

    let mut csv = csv::Writer::from_path(out.join("residual.csv"))?;
    csv.write_record(["z_km", "mean_abs_residual", "term1", "term2", "term3", "term4"])?;
    for row in rows {
        let r = &row.report;
        let t = r.per_term_norms;
        csv.write_record([r.z_km, r.mean_abs_residual, t[0], t[1], t[2], t[3]].map(|v| v.to_string()))?;
    }
    csv.flush()?;
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let HarnessError::Divergence { checkpoint: Some(p), .. } = &e {
                eprintln!("last good model saved at {}", p.display());
            }
            e.exit_code()
        }
    }
}
