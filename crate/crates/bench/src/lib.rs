//! Fixed inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ministack_core::backends::{builtin_profile, telemetry, DEFAULT_REFRESH_INTERVAL_S};
use ministack_core::circuit::random::{measure_all, random_circuit};
use ministack_core::qdmi::{DeviceProperties, TelemetrySnapshot};
use ministack_core::scheduler::DeviceCandidate;
use ministack_core::QuantumCircuit;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Properties and a telemetry snapshot of a built-in device at time `t`.
pub fn target(device_id: &str, t: f64) -> (DeviceProperties, TelemetrySnapshot) {
    let profile = builtin_profile(device_id).expect("built-in device");
    let snap = telemetry::generate(&profile, t, DEFAULT_REFRESH_INTERVAL_S);
    (profile.properties, snap)
}

/// A seeded random circuit with a final measurement of every qubit.
pub fn measured_circuit(seed: u64, qubits: usize, ops: usize) -> QuantumCircuit {
    let mut c = random_circuit(&mut rng(seed), qubits, ops);
    measure_all(&mut c);
    c
}

pub fn candidates(seed: u64, n: usize) -> Vec<DeviceCandidate> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| DeviceCandidate {
            device_id: format!("d{i}"),
            est_wait_s: r.random_range(0.0..300.0),
            esp: r.random_range(0.0..=1.0),
            est_exec_s: r.random_range(0.0..20.0),
            healthy: true,
        })
        .collect()
}
