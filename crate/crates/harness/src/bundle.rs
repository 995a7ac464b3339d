//! A model on disk: `<stem>.fddn` (FDDN v1 weights) plus `<stem>.toml`
//! holding the model kind, fiber parameters, distance reference and network
//! configuration.

use std::path::{Path, PathBuf};

use fdd_core::net::{load_checkpoint, save_checkpoint};
use fdd_core::{ChannelModel, FiberParams, ModelKind, NetConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: ModelKind,
    pub z_ref_km: f64,
    pub fiber: FiberParams,
    pub net: NetConfig,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("fddn"), stem.with_extension("toml"))
}

pub fn save_bundle(stem: &Path, model: &ChannelModel) -> Result<()> {
    let (weights, sidecar) = paths(stem);
    save_checkpoint(&weights, model.net())?;
    let meta = Sidecar {
        kind: model.kind(),
        z_ref_km: model.z_ref_km(),
        fiber: *model.fiber(),
        net: model.net().config().clone(),
    };
    std::fs::write(sidecar, toml::to_string_pretty(&meta).map_err(|e| HarnessError::Config(e.to_string()))?)?;
    Ok(())
}

/// Loads a bundle. `data_fiber`, when given, is the physics the caller will
/// evaluate against and must match the stored tail.
pub fn load_bundle(stem: &Path, data_fiber: Option<&FiberParams>) -> Result<ChannelModel> {
    let (weights, sidecar) = paths(stem);
    let meta: Sidecar = toml::from_str(&std::fs::read_to_string(sidecar)?).map_err(|e| HarnessError::Config(e.to_string()))?;
    if meta.z_ref_km != meta.net.z_ref_km {
        return Err(HarnessError::Config("sidecar z_ref_km disagrees with the network configuration".into()));
    }
    let net = load_checkpoint(&weights, Some(&meta.net))?;
    Ok(ChannelModel::new(meta.kind, net, meta.fiber, data_fiber.unwrap_or(&meta.fiber))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdd_core::SurrogateNet;

    #[test]
    fn bundle_round_trip_and_physics_check() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("model");
        let fp = FiberParams::default();
        let net = SurrogateNet::new(NetConfig { hidden_size: 4, ..NetConfig::default() }).unwrap();
        let model = ChannelModel::new(ModelKind::Fdd, net, fp, &fp).unwrap();
        save_bundle(&stem, &model).unwrap();
        let back = load_bundle(&stem, Some(&fp)).unwrap();
        assert_eq!(back.kind(), ModelKind::Fdd);
        assert_eq!(back.net().params(), model.net().params());
        let other = FiberParams { gamma_per_w_km: 0.0, ..fp };
        assert_eq!(load_bundle(&stem, Some(&other)).unwrap_err().exit_code(), 2);
    }
}
