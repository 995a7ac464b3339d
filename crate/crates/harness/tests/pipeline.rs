use fdd_core::net::waveform_features;
use fdd_core::{ModelKind, NetConfig, TxConfig};
use fdd_harness::compare::compare;
use fdd_harness::eval::training_nmse;
use fdd_harness::{build_dataset, evaluate, train, ExperimentConfig};

fn small(kind: ModelKind, epochs: usize) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        epochs,
        window_len: 128,
        n_train_frames: 4,
        n_eval_frames: 1,
        train_distances_km: vec![10.0, 30.0],
        eval_distances_km: vec![10.0, 20.0, 30.0, 40.0],
        tx: TxConfig { n_symbols: 128, ..TxConfig::desk() },
        net: NetConfig { hidden_size: 8, ..NetConfig::default() },
        ..ExperimentConfig::desk()
    }
}

#[test]
fn training_distance_evaluation_matches_final_training_loss() {
    for kind in [ModelKind::Baseline, ModelKind::Fdd] {
        let cfg = small(kind, 20);
        let (model, log) = train(&cfg, None).unwrap();
        let data = build_dataset(&cfg).unwrap();
        let scale = cfg.net_config().field_scale;

        // Target energy per training distance, and the mean normalized target
        // power that converts the logged MSE into an NMSE.
        let mut energy = vec![0.0; cfg.train_distances_km.len()];
        let (mut power, mut count) = (0.0, 0usize);
        for w in &data.windows {
            let d = cfg.train_distances_km.iter().position(|&z| z == w.z_km).unwrap();
            for f in waveform_features(&w.target) {
                energy[d] += f.iter().map(|v| v * v).sum::<f64>();
                power += f.iter().map(|v| (v / scale).powi(2)).sum::<f64>();
                count += 4;
            }
        }
        let logged = log.last_epoch().unwrap().train_mse / (power / count as f64);
        let err: f64 = (0..energy.len()).map(|d| training_nmse(&model, &cfg, d).unwrap() * energy[d]).sum();
        let measured = err / energy.iter().sum::<f64>();
        let ratio = measured / logged;
        assert!((0.5..=2.0).contains(&ratio), "{kind}: evaluated {measured:e} vs logged {logged:e}");
    }
}

#[test]
fn linear_fdd_generalizes_across_distance() {
    let mut cfg = small(ModelKind::Fdd, 30);
    cfg.fiber.gamma_per_w_km = 0.0;
    let (model, _) = train(&cfg, None).unwrap();
    let rows = evaluate(&model, &cfg).unwrap();
    let trained = rows.iter().filter(|r| r.in_training_set).map(|r| r.nmse).fold(0.0, f64::max);
    for r in rows.iter().filter(|r| !r.in_training_set) {
        assert!(r.nmse <= 2.0 * trained, "{} km: {:e} vs trained {:e}", r.z_km, r.nmse, trained);
    }
}

#[test]
fn evaluation_is_repeatable() {
    let cfg = small(ModelKind::Fdd, 1);
    let (model, _) = train(&cfg, None).unwrap();
    assert_eq!(evaluate(&model, &cfg).unwrap(), evaluate(&model, &cfg).unwrap());
}

#[test]
fn identical_kinds_give_identical_pairs() {
    let cfg = small(ModelKind::Baseline, 2);
    let c = compare(&cfg, &cfg, None).unwrap();
    assert_eq!(c.rows.len(), cfg.eval_distances_km.len());
    for r in &c.rows {
        assert_eq!(r.nmse_a.to_bits(), r.nmse_b.to_bits());
    }
    assert_eq!(c.summary.final_nlse_loss_a.to_bits(), c.summary.final_nlse_loss_b.to_bits());
}

#[test]
fn compare_rejects_configs_differing_beyond_kind() {
    let a = small(ModelKind::Baseline, 1);
    let b = ExperimentConfig { seed: 9, ..small(ModelKind::Fdd, 1) };
    assert_eq!(compare(&a, &b, None).unwrap_err().exit_code(), 2);
}
