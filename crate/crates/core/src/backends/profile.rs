use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::qdmi::DeviceProperties;

const SC20_JSON: &str = include_str!("../../data/profiles/sc20.json");
const ION5_JSON: &str = include_str!("../../data/profiles/ion5.json");

/// Static device properties plus the parameters of the synthetic telemetry
/// generator. Stored as a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    #[serde(flatten)]
    pub properties: DeviceProperties,
    /// Mean fidelity per native gate.
    pub base_fidelities: BTreeMap<Gate, f64>,
    pub base_readout_fidelity: f64,
    /// `p(0|0) − p(1|1)` around the base readout fidelity.
    pub readout_asymmetry: f64,
    pub base_t1_s: f64,
    pub base_t2_s: f64,
    pub base_temperature_mk: f64,
    pub temperature_drift_mk: f64,
    pub temperature_sigma_mk: f64,
    pub drift_amplitude: f64,
    pub drift_period_s: f64,
    pub noise_sigma: f64,
    pub calibration_period_s: f64,
    pub rng_seed: u64,
}

impl DeviceProfile {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let profile: DeviceProfile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        self.properties.validate()?;
        let spread = self.drift_amplitude.abs() + 4.0 * self.noise_sigma.abs();
        let half_asym = self.readout_asymmetry.abs() / 2.0;
        let bases = self
            .base_fidelities
            .iter()
            .map(|(g, b)| (g.name().to_string(), *b, spread))
            .chain([("readout".to_string(), self.base_readout_fidelity, spread + half_asym)]);
        for (name, base, spread) in bases {
            if base - spread < 0.0 || base + spread > 1.0 {
                return Err(format!("{name}: base {base} ± {spread} leaves [0,1]"));
            }
        }
        if let Some(g) = self.base_fidelities.keys().find(|g| !self.properties.native_gates.contains(g)) {
            return Err(format!("base fidelity for non-native gate `{g}`"));
        }
        if self.drift_period_s <= 0.0 || self.calibration_period_s <= 0.0 {
            return Err("periods must be positive".into());
        }
        if self.base_t1_s <= 0.0 || self.base_t2_s <= 0.0 || self.base_t2_s > 2.0 * self.base_t1_s {
            return Err("coherence times must satisfy 0 < t2 <= 2·t1".into());
        }
        Ok(())
    }

    pub fn device_id(&self) -> &str {
        &self.properties.device_id
    }
}

/// The two shipped profiles: `sc20` and `ion5`.
pub fn builtin_profiles() -> Vec<DeviceProfile> {
    [SC20_JSON, ION5_JSON]
        .iter()
        .map(|t| DeviceProfile::from_json(t).expect("built-in profile is valid"))
        .collect()
}

/// Looks up one of the built-in profiles by id.
pub fn builtin_profile(device_id: &str) -> Option<DeviceProfile> {
    builtin_profiles().into_iter().find(|p| p.device_id() == device_id)
}
