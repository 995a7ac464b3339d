use fdd_core::linear::{apply_forward, LinearOperator};
use fdd_core::model::{training_target, Surrogate};
use fdd_core::net::{load_checkpoint, save_checkpoint};
use fdd_core::residual::{field_scale, residual_of_ssfm};
use fdd_core::ssfm::propagate;
use fdd_core::transmitter::transmit;
use fdd_core::{dpwf, nmse, ChannelModel, DualPolWaveform, FiberParams, ModelKind, NetConfig, Result, SsfmConfig, SurrogateNet, TxConfig};
use proptest::prelude::*;

/// Returns the decoupled target it was fitted to, whatever the input.
struct Memorized(DualPolWaveform);

impl Surrogate for Memorized {
    fn forward(&self, _: &DualPolWaveform, z_km: f64) -> Result<DualPolWaveform> {
        Ok(self.0.clone().with_z(z_km))
    }

    fn d_output_dz(&self, w: &DualPolWaveform, _: f64, _: f64) -> Result<DualPolWaveform> {
        Ok(DualPolWaveform::zeros(*w.grid(), w.z_km()))
    }

    fn z_ref_km(&self) -> f64 {
        100.0
    }
}

fn launch(seed: u64, power_dbm: f64) -> DualPolWaveform {
    let cfg = TxConfig { seed, power_dbm_per_channel: power_dbm, n_symbols: 64, ..TxConfig::desk() };
    transmit(&cfg).unwrap().1
}

#[test]
fn perfect_decoupled_net_reproduces_the_nonlinear_channel() {
    let fp = FiberParams::default();
    let tx = launch(3, 8.0);
    let z = 60.0;
    let rx = propagate(&tx, &fp, z, &SsfmConfig::default()).unwrap();
    let target = training_target(ModelKind::Fdd, &rx, &fp, z).unwrap();
    assert!(nmse(&target, &tx).unwrap() > 1e-6, "channel should be visibly nonlinear");
    let model = ChannelModel::new(ModelKind::Fdd, Memorized(target), fp, &fp).unwrap();
    assert!(nmse(&model.predict(&tx, z).unwrap(), &rx).unwrap() < 1e-24);
}

#[test]
fn saved_waveforms_and_nets_predict_identically() {
    let dir = tempfile::tempdir().unwrap();
    let tx = launch(4, 5.0);
    dpwf::save(dir.path().join("tx.dpwf"), &tx).unwrap();
    let loaded = dpwf::load(dir.path().join("tx.dpwf"), Some(tx.grid())).unwrap();
    assert_eq!(loaded, tx);

    let cfg = NetConfig { hidden_size: 6, field_scale: 0.05, ..NetConfig::default() };
    let net = SurrogateNet::new(cfg.clone()).unwrap();
    save_checkpoint(dir.path().join("net.fddn"), &net).unwrap();
    let back = load_checkpoint(dir.path().join("net.fddn"), Some(&cfg)).unwrap();
    let fp = FiberParams::default();
    let a = ChannelModel::new(ModelKind::Fdd, net, fp, &fp).unwrap();
    let b = ChannelModel::new(ModelKind::Fdd, back, fp, &fp).unwrap();
    assert_eq!(a.predict(&loaded, 35.0).unwrap(), b.predict(&tx, 35.0).unwrap());
    assert_eq!(a.predict_dz(&loaded, 35.0, 0.1).unwrap(), b.predict_dz(&tx, 35.0, 0.1).unwrap());
}

#[test]
fn split_step_solution_nearly_satisfies_the_nlse() {
    let fp = FiberParams::default();
    let tx = launch(5, 8.0);
    let r = residual_of_ssfm(&tx, &fp, 40.0, 0.05, &SsfmConfig::default()).unwrap();
    let s = propagate(&tx, &fp, 40.0, &SsfmConfig::default()).unwrap();
    let largest = r.per_term_norms.iter().cloned().fold(0.0, f64::max);
    assert!(r.mean_abs_residual < 1e-3 * largest, "{r:?}");
    assert!(r.mean_abs_residual < 1e-4 * field_scale(&s));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lossless_propagation_conserves_energy(seed in 0u64..1000, power in -5.0f64..12.0, z in 0.5f64..80.0) {
        let fp = FiberParams { alpha_db_per_km: 0.0, ..FiberParams::default() };
        let tx = launch(seed, power);
        let rx = propagate(&tx, &fp, z, &SsfmConfig::default()).unwrap();
        prop_assert!((rx.energy() / tx.energy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_split_step_equals_the_linear_operator(seed in 0u64..1000, z in 0.0f64..100.0) {
        let fp = FiberParams { gamma_per_w_km: 0.0, ..FiberParams::default() };
        let tx = launch(seed, 5.0);
        let rx = propagate(&tx, &fp, z, &SsfmConfig::default()).unwrap();
        let op = LinearOperator::new(fp, z, true).unwrap();
        prop_assert!(nmse(&rx, &apply_forward(&tx, &op)).unwrap() < 1e-24);
    }

    #[test]
    fn attenuation_scales_energy_exactly(seed in 0u64..1000, z in 0.0f64..100.0) {
        let fp = FiberParams::default();
        let tx = launch(seed, 5.0);
        let rx = propagate(&tx, &fp, z, &SsfmConfig::default()).unwrap();
        let expect = (-fp.alpha_linear() * z).exp();
        prop_assert!((rx.energy() / tx.energy() / expect - 1.0).abs() < 1e-12);
    }
}
