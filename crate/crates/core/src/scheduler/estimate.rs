use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuit::{Gate, QuantumCircuit};
use crate::qdmi::DeviceProperties;

/// Gate counts and ASAP layering of a circuit, enough to predict run time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub gate_counts: BTreeMap<Gate, usize>,
    /// Gate multiset per ASAP layer; barriers are not counted.
    pub layers: Vec<BTreeMap<Gate, usize>>,
}

impl CircuitStats {
    pub fn from_circuit(circuit: &QuantumCircuit) -> Self {
        let mut stats = CircuitStats::default();
        let mut front = vec![0usize; circuit.num_qubits];
        for op in &circuit.ops {
            let start = op.qubits.iter().map(|&q| front[q]).max().unwrap_or(0);
            if op.gate == Gate::Barrier {
                for &q in &op.qubits {
                    front[q] = start;
                }
                continue;
            }
            *stats.gate_counts.entry(op.gate).or_default() += 1;
            if stats.layers.len() <= start {
                stats.layers.resize_with(start + 1, BTreeMap::new);
            }
            *stats.layers[start].entry(op.gate).or_default() += 1;
            for &q in &op.qubits {
                front[q] = start + 1;
            }
        }
        stats
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn op_count(&self) -> usize {
        self.gate_counts.values().sum()
    }

    /// Σ over layers of the longest gate duration in the layer.
    pub fn critical_path(&self, durations: impl Fn(Gate) -> f64) -> f64 {
        self.layers
            .iter()
            .map(|layer| layer.keys().map(|&g| durations(g)).fold(0.0, f64::max))
            .sum()
    }
}

/// `setup_overhead + shots · (critical_path + shot_overhead)`.
pub fn estimate_execution_time(stats: &CircuitStats, device: &DeviceProperties, shots: u64) -> f64 {
    let critical = stats.critical_path(|g| device.duration(g));
    device.setup_overhead + shots as f64 * (critical + device.shot_overhead)
}

/// Same model for stats of a circuit not yet translated for the device:
/// non-native one-qubit gates take the slowest native one-qubit duration,
/// two-qubit gates the native entangler's (three of them for swap).
pub fn estimate_generic_execution_time(stats: &CircuitStats, device: &DeviceProperties, shots: u64) -> f64 {
    let slowest_1q = device
        .native_gates
        .iter()
        .filter(|g| g.num_qubits() == Some(1))
        .map(|&g| device.duration(g))
        .fold(0.0, f64::max);
    let two_q = device.two_qubit_gate().map(|g| device.duration(g)).unwrap_or(0.0);
    let critical = stats.critical_path(|g| match g {
        _ if device.native_gates.contains(&g) => device.duration(g),
        Gate::Measure | Gate::Barrier | Gate::Id => 0.0,
        Gate::Swap => 3.0 * two_q,
        _ if g.num_qubits() == Some(2) => two_q,
        _ => slowest_1q,
    });
    device.setup_overhead + shots as f64 * (critical + device.shot_overhead)
}
