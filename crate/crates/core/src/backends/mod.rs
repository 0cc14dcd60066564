//! Simulated device plugins.

mod profile;
mod statevector;
pub mod telemetry;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::QuantumCircuit;
use crate::clock::Clock;
use crate::qdmi::{
    validate_program, CancelToken, Confusion, Counts, DevicePlugin, DeviceProperties, ExecutionError, TelemetrySnapshot,
};

pub use profile::{builtin_profile, builtin_profiles, DeviceProfile};
pub use statevector::Statevector;
pub use telemetry::DEFAULT_REFRESH_INTERVAL_S;

pub const MAX_SIM_QUBITS: usize = 24;

const OPS_PER_CANCEL_CHECK: usize = 64;
const SHOTS_PER_CANCEL_CHECK: usize = 4096;
const READOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Runs the unitary part of `circuit` and samples `shots` outcomes.
///
/// Only the qubits the circuit touches are simulated. When `confusion` is
/// given, each measured bit is flipped according to the entry of the
/// physical qubit it was read from (missing entries read perfectly).
pub fn simulate_counts(
    circuit: &QuantumCircuit,
    shots: u64,
    seed: u64,
    confusion: Option<&BTreeMap<usize, Confusion>>,
    cancel: &CancelToken,
) -> Result<Counts, ExecutionError> {
    let active: Vec<usize> = circuit.active_qubits().into_iter().collect();
    if active.len() > MAX_SIM_QUBITS {
        return Err(ExecutionError::Validation(format!(
            "{} active qubits exceed the simulator limit of {MAX_SIM_QUBITS}",
            active.len()
        )));
    }
    let compact = |q: usize| active.binary_search(&q).expect("active qubit");

    let mut sv = Statevector::zero(active.len());
    let mut local = Vec::with_capacity(2);
    for (i, op) in circuit.ops.iter().enumerate() {
        if i % OPS_PER_CANCEL_CHECK == 0 && cancel.is_cancelled() {
            return Err(ExecutionError::Cancelled);
        }
        if !op.gate.is_unitary() {
            continue;
        }
        local.clear();
        local.extend(op.qubits.iter().map(|&q| compact(q)));
        sv.apply(op.gate, &op.params, &local);
    }

    // clbit → (compact qubit, physical qubit); a later measure of the same clbit wins
    let mut readout: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (c, q) in circuit.measurements() {
        readout.insert(c, (compact(q), q));
    }
    let order: Vec<(usize, usize)> = readout.values().rev().copied().collect();
    let flips: Vec<(f64, f64)> = order
        .iter()
        .map(|&(_, phys)| {
            let c = confusion.and_then(|m| m.get(&phys)).copied().unwrap_or(Confusion::PERFECT);
            (1.0 - c.p0_given_0, 1.0 - c.p1_given_1)
        })
        .collect();
    let noisy = confusion.is_some() && flips.iter().any(|&(a, b)| a > 0.0 || b > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ READOUT_STREAM);
    let mut tally: BTreeMap<String, u64> = BTreeMap::new();
    let mut remaining = shots as usize;
    let mut key = String::with_capacity(order.len());
    while remaining > 0 {
        if cancel.is_cancelled() {
            return Err(ExecutionError::Cancelled);
        }
        let chunk = remaining.min(SHOTS_PER_CANCEL_CHECK);
        for idx in sv.sample(chunk, &mut rng) {
            key.clear();
            for (k, &(bit, _)) in order.iter().enumerate() {
                let mut one = (idx >> bit) & 1 == 1;
                if noisy {
                    let p_flip = if one { flips[k].1 } else { flips[k].0 };
                    if noise_rng.random::<f64>() < p_flip {
                        one = !one;
                    }
                }
                key.push(if one { '1' } else { '0' });
            }
            *tally.entry(key.clone()).or_insert(0) += 1;
        }
        remaining -= chunk;
    }
    Ok(Counts::from_map(tally))
}

/// Runtime knobs for a simulated device, adjustable while it is registered.
#[derive(Debug, Clone, Default)]
pub struct SimulatorControls {
    /// Pins the reported temperature.
    pub temperature_mk: Option<f64>,
    /// Pins the reported calibration timestamp.
    pub calibrated_at: Option<f64>,
    /// Wall-clock time each execution takes in addition to simulation.
    pub exec_delay: Option<Duration>,
}

/// Statevector simulator behind the device-plugin contract.
pub struct SimulatorDevice {
    profile: DeviceProfile,
    readout_noise: bool,
    refresh_interval_s: f64,
    clock: Arc<dyn Clock>,
    controls: Mutex<SimulatorControls>,
}

impl SimulatorDevice {
    pub fn new(profile: DeviceProfile, clock: Arc<dyn Clock>) -> Self {
        SimulatorDevice {
            profile,
            readout_noise: false,
            refresh_interval_s: DEFAULT_REFRESH_INTERVAL_S,
            clock,
            controls: Mutex::new(SimulatorControls::default()),
        }
    }

    pub fn with_readout_noise(mut self, enabled: bool) -> Self {
        self.readout_noise = enabled;
        self
    }

    pub fn with_refresh_interval(mut self, seconds: f64) -> Self {
        assert!(seconds > 0.0, "refresh interval must be positive");
        self.refresh_interval_s = seconds;
        self
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn controls(&self) -> SimulatorControls {
        self.controls.lock().unwrap().clone()
    }

    pub fn set_controls(&self, controls: SimulatorControls) {
        *self.controls.lock().unwrap() = controls;
    }

    fn wait_delay(delay: Duration, cancel: &CancelToken) -> Result<(), ExecutionError> {
        let until = Instant::now() + delay;
        loop {
            if cancel.is_cancelled() {
                return Err(ExecutionError::Cancelled);
            }
            let left = until.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(());
            }
            std::thread::sleep(left.min(Duration::from_millis(5)));
        }
    }
}

impl DevicePlugin for SimulatorDevice {
    fn static_properties(&self) -> DeviceProperties {
        self.profile.properties.clone()
    }

    fn telemetry(&self, now: f64) -> TelemetrySnapshot {
        let mut snap = telemetry::generate(&self.profile, now, self.refresh_interval_s);
        let controls = self.controls();
        if let Some(t) = controls.temperature_mk {
            snap.temperature_mk = t;
        }
        if let Some(c) = controls.calibrated_at {
            snap.calibrated_at = c.min(snap.taken_at);
        }
        snap
    }

    fn execute(&self, program: &str, shots: u64, seed: u64, cancel: &CancelToken) -> Result<Counts, ExecutionError> {
        let circuit = validate_program(&self.profile.properties, program)
            .map_err(|e| ExecutionError::Validation(e.to_string()))?;
        if shots == 0 {
            return Err(ExecutionError::Validation("shots must be positive".into()));
        }
        if let Some(delay) = self.controls().exec_delay {
            Self::wait_delay(delay, cancel)?;
        }
        let confusion = self.readout_noise.then(|| self.telemetry(self.clock.now()).confusion);
        simulate_counts(&circuit, shots, seed, confusion.as_ref(), cancel)
    }
}

/// Wraps a plugin and makes a seeded fraction of executions fail.
pub struct FlakyDevice<P> {
    inner: P,
    failure_rate: f64,
}

impl<P: DevicePlugin> FlakyDevice<P> {
    pub fn new(inner: P, failure_rate: f64) -> Self {
        FlakyDevice { inner, failure_rate }
    }

    /// Whether the execution with this seed is one of the forced failures.
    pub fn fails(&self, seed: u64) -> bool {
        ChaCha8Rng::seed_from_u64(seed ^ 0xfa11).random::<f64>() < self.failure_rate
    }
}

impl<P: DevicePlugin> DevicePlugin for FlakyDevice<P> {
    fn static_properties(&self) -> DeviceProperties {
        self.inner.static_properties()
    }

    fn telemetry(&self, now: f64) -> TelemetrySnapshot {
        self.inner.telemetry(now)
    }

    fn execute(&self, program: &str, shots: u64, seed: u64, cancel: &CancelToken) -> Result<Counts, ExecutionError> {
        if self.fails(seed) {
            return Err(ExecutionError::Device("injected failure".into()));
        }
        self.inner.execute(program, shots, seed, cancel)
    }
}

/// Registers the built-in profiles as simulators on `clock`.
pub fn builtin_devices(clock: Arc<dyn Clock>, readout_noise: bool) -> Vec<Arc<SimulatorDevice>> {
    builtin_profiles()
        .into_iter()
        .map(|p| Arc::new(SimulatorDevice::new(p, clock.clone()).with_readout_noise(readout_noise)))
        .collect()
}
