//! Synthetic drifting calibration data.
//!
//! A value sampled at time `t` is `base + drift·sin(2πt_b/period) + ε`, where
//! `t_b` is `t` rounded down to the refresh interval and `ε` is a Gaussian
//! draw (truncated at ±4σ) seeded by `(rng_seed, quantity, qubits, bucket)`.
//! Everything inside one refresh interval is therefore identical.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::profile::DeviceProfile;
use crate::qdmi::{Confusion, GateKey, TelemetrySnapshot};

pub const DEFAULT_REFRESH_INTERVAL_S: f64 = 10.0;

fn stream_seed(seed: u64, tag: &str, qubits: &[usize], bucket: i64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(&seed.to_le_bytes());
    feed(tag.as_bytes());
    for q in qubits {
        feed(&(*q as u64).to_le_bytes());
    }
    feed(&bucket.to_le_bytes());
    h
}

/// Standard normal draw truncated to [-4, 4].
fn gaussian(seed: u64) -> f64 {
    let z: f64 = StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(seed));
    z.clamp(-4.0, 4.0)
}

pub fn generate(profile: &DeviceProfile, now: f64, refresh_interval_s: f64) -> TelemetrySnapshot {
    let props = &profile.properties;
    let bucket = (now / refresh_interval_s).floor() as i64;
    let t = bucket as f64 * refresh_interval_s;
    let phase = (TAU * t / profile.drift_period_s).sin();
    let drift = profile.drift_amplitude * phase;
    let noise = |tag: &str, qubits: &[usize]| gaussian(stream_seed(profile.rng_seed, tag, qubits, bucket));
    let unit = |v: f64| v.clamp(0.0, 1.0);

    let mut gate_fidelity = BTreeMap::new();
    for (&gate, &base) in &profile.base_fidelities {
        let targets: Vec<Vec<usize>> = match gate.num_qubits() {
            Some(1) => (0..props.num_qubits).map(|q| vec![q]).collect(),
            Some(2) => props.coupling_map.iter().map(|&(a, b)| vec![a, b]).collect(),
            _ => continue,
        };
        for qs in targets {
            let f = unit(base + drift + profile.noise_sigma * noise(gate.name(), &qs));
            gate_fidelity.insert(GateKey::new(gate, &qs), f);
        }
    }

    let mut t1 = BTreeMap::new();
    let mut t2 = BTreeMap::new();
    let mut readout_fidelity = BTreeMap::new();
    let mut confusion = BTreeMap::new();
    let half_asym = profile.readout_asymmetry / 2.0;
    for q in 0..props.num_qubits {
        let p00 = unit(profile.base_readout_fidelity + half_asym + drift + profile.noise_sigma * noise("p00", &[q]));
        let p11 = unit(profile.base_readout_fidelity - half_asym + drift + profile.noise_sigma * noise("p11", &[q]));
        confusion.insert(q, Confusion { p0_given_0: p00, p1_given_1: p11 });
        readout_fidelity.insert(q, (p00 + p11) / 2.0);
        let q1 = profile.base_t1_s * (1.0 + 0.05 * noise("t1", &[q]));
        let q2 = (profile.base_t2_s * (1.0 + 0.05 * noise("t2", &[q]))).min(2.0 * q1);
        t1.insert(q, q1);
        t2.insert(q, q2);
    }

    let temperature_mk = (profile.base_temperature_mk
        + profile.temperature_drift_mk * phase
        + profile.temperature_sigma_mk * noise("temperature", &[]))
    .max(0.0);
    let calibrated_at = (t / profile.calibration_period_s).floor() * profile.calibration_period_s;

    TelemetrySnapshot {
        device_id: props.device_id.clone(),
        taken_at: t,
        gate_fidelity,
        t1,
        t2,
        readout_fidelity,
        confusion,
        temperature_mk,
        calibrated_at,
    }
}
