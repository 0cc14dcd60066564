//! Figures of merit and constraints derived from raw telemetry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Gate, Level, QuantumCircuit};
use crate::qdmi::{Qdmi, QdmiError, TelemetrySnapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FomacError {
    #[error("validation failed: {0}")]
    Validation(String),
}

/// Environmental thresholds beyond which a device is reported unhealthy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FomacLimits {
    pub max_temperature_mk: f64,
    pub max_calibration_age_s: f64,
}

impl Default for FomacLimits {
    fn default() -> Self {
        FomacLimits { max_temperature_mk: 60.0, max_calibration_age_s: 24.0 * 3600.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomacReport {
    pub device_id: String,
    pub taken_at: f64,
    pub avg_1q_fidelity: f64,
    pub avg_2q_fidelity: f64,
    pub avg_readout_fidelity: f64,
    pub best_qubit_ranking: Vec<usize>,
    pub healthy: bool,
    pub health_reasons: Vec<String>,
    #[serde(rename = "temperature_mK")]
    pub temperature_mk: f64,
    pub calibrated_at: f64,
}

/// Mean of the values, 1.0 for none.
fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        1.0
    } else {
        sum / n as f64
    }
}

/// Average gate fidelities of one snapshot, by gate and by arity.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassAverages {
    pub per_gate: BTreeMap<Gate, f64>,
    pub one_qubit: f64,
    pub two_qubit: f64,
    pub readout: f64,
}

impl ClassAverages {
    pub fn of(snapshot: &TelemetrySnapshot) -> Self {
        let mut by_gate: BTreeMap<Gate, Vec<f64>> = BTreeMap::new();
        for (k, f) in &snapshot.gate_fidelity {
            by_gate.entry(k.gate).or_default().push(*f);
        }
        let arity = |n: usize| {
            mean(snapshot.gate_fidelity.iter().filter(|(k, _)| k.qubits.len() == n).map(|(_, f)| *f))
        };
        ClassAverages {
            per_gate: by_gate.into_iter().map(|(g, v)| (g, mean(v))).collect(),
            one_qubit: arity(1),
            two_qubit: arity(2),
            readout: mean(snapshot.readout_fidelity.values().copied()),
        }
    }

    /// Fallback fidelity for a gate without its own entry.
    pub fn gate(&self, gate: Gate) -> f64 {
        self.per_gate.get(&gate).copied().unwrap_or(match gate.num_qubits() {
            Some(2) => self.two_qubit,
            _ => self.one_qubit,
        })
    }
}

/// Unhealthy iff too warm or the calibration is older than allowed.
pub fn environment_health(snapshot: &TelemetrySnapshot, limits: &FomacLimits, now: f64) -> (bool, Vec<String>) {
    let mut reasons = Vec::new();
    if snapshot.temperature_mk > limits.max_temperature_mk {
        reasons.push("temperature".to_string());
    }
    if now - snapshot.calibrated_at > limits.max_calibration_age_s {
        reasons.push("calibration_age".to_string());
    }
    (reasons.is_empty(), reasons)
}

/// Builds the report for one snapshot of a device with `num_qubits` qubits.
pub fn report(snapshot: &TelemetrySnapshot, num_qubits: usize, limits: &FomacLimits, now: f64) -> FomacReport {
    let avg = ClassAverages::of(snapshot);
    let mut one_q: Vec<Vec<f64>> = vec![Vec::new(); num_qubits];
    for (k, f) in &snapshot.gate_fidelity {
        if let [q] = k.qubits[..] {
            if q < num_qubits {
                one_q[q].push(*f);
            }
        }
    }
    let quality: Vec<f64> = (0..num_qubits)
        .map(|q| {
            let readout = snapshot.readout_fidelity.get(&q).copied().unwrap_or(avg.readout);
            let gates = if one_q[q].is_empty() { avg.one_qubit } else { mean(one_q[q].iter().copied()) };
            readout * gates
        })
        .collect();
    let mut ranking: Vec<usize> = (0..num_qubits).collect();
    ranking.sort_by(|&a, &b| quality[b].total_cmp(&quality[a]).then(a.cmp(&b)));
    let (healthy, health_reasons) = environment_health(snapshot, limits, now);
    FomacReport {
        device_id: snapshot.device_id.clone(),
        taken_at: snapshot.taken_at,
        avg_1q_fidelity: avg.one_qubit,
        avg_2q_fidelity: avg.two_qubit,
        avg_readout_fidelity: avg.readout,
        best_qubit_ranking: ranking,
        healthy,
        health_reasons,
        temperature_mk: snapshot.temperature_mk,
        calibrated_at: snapshot.calibrated_at,
    }
}

/// Reads the latest snapshot of a registered device and aggregates it.
pub fn aggregate(qdmi: &Qdmi, device_id: &str, limits: &FomacLimits) -> Result<FomacReport, QdmiError> {
    let props = qdmi.device_properties(device_id)?;
    let snap = qdmi.telemetry(device_id)?;
    Ok(report(&snap, props.num_qubits, limits, qdmi.now()))
}

/// Product of the fidelities of every gate and readout in a native circuit.
pub fn estimate_success_probability(circuit: &QuantumCircuit, snapshot: &TelemetrySnapshot) -> Result<f64, FomacError> {
    if circuit.level != Level::Native {
        return Err(FomacError::Validation("circuit is not native".into()));
    }
    circuit.validate().map_err(|e| FomacError::Validation(e.to_string()))?;
    let avg = ClassAverages::of(snapshot);
    let mut esp = 1.0;
    for op in &circuit.ops {
        esp *= match op.gate {
            Gate::Barrier => 1.0,
            Gate::Measure => snapshot.readout_fidelity.get(&op.qubits[0]).copied().unwrap_or(avg.readout),
            g => snapshot.fidelity(g, &op.qubits).unwrap_or_else(|| avg.gate(g)),
        };
    }
    Ok(esp.clamp(0.0, 1.0))
}

/// Rough success estimate for a circuit not yet compiled for the device:
/// every generic op is charged its arity-class average (swap three times).
pub fn estimate_generic_success(circuit: &QuantumCircuit, snapshot: &TelemetrySnapshot) -> f64 {
    let avg = ClassAverages::of(snapshot);
    let mut esp = 1.0;
    for op in &circuit.ops {
        esp *= match op.gate {
            Gate::Barrier | Gate::Id => 1.0,
            Gate::Measure => avg.readout,
            Gate::Swap => avg.two_qubit.powi(3),
            g if g.num_qubits() == Some(2) => avg.two_qubit,
            _ => avg.one_qubit,
        };
    }
    esp.clamp(0.0, 1.0)
}
