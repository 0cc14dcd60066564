//! Pass-based compiler from generic circuits to device programs.
//!
//! Device-agnostic passes rewrite generic circuits; the device-specific trio
//! translates to the native gate set, picks a layout and routes.

mod optimize;
mod place;
mod route;
mod select;
mod translate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{emit_lowlevel, Gate, Layout, Level, QuantumCircuit};
use crate::fomac::{estimate_generic_success, estimate_success_probability};
use crate::qdmi::{DeviceProperties, TelemetrySnapshot};
use crate::scheduler::CircuitStats;

pub use optimize::{cancel_inverse_pairs, commute_reorder, commutes, fuse_1q, is_inverse_pair, normalize_angle, zyz_angles, ANGLE_EPS};
pub use place::{distance_matrix, edge_fidelity, place};
pub use route::{best_path, route, shortest_paths, Routed};
pub use select::{
    circuit_digest, Pass, PassDescriptor, PassPipeline, PassSelector, PassStage, Provenance, SelectorRegistry,
    DEFAULT_SELECTOR, SPECIFIC_TRIO,
};
pub use translate::{basis_translate, DecompositionRule, DecompositionTable, RuleStep};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("no decomposition for `{0}` into the device's native gates")]
    NoDecomposition(Gate),
    #[error("circuit needs {circuit} qubits, device has {device}")]
    TooWide { circuit: usize, device: usize },
    #[error("no path between physical qubits {0} and {1}")]
    DisconnectedDevice(usize, usize),
    #[error("unknown pass-selection policy `{0}`")]
    UnknownPolicy(String),
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassStat {
    pub pass: Pass,
    pub ops: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileStats {
    pub input_ops: usize,
    pub input_depth: usize,
    /// Op count and depth after each pass, in pipeline order.
    pub passes: Vec<PassStat>,
    pub swap_count: usize,
    pub esp_before: f64,
    pub esp_after: f64,
    /// Seconds along the longest path of native gate durations.
    pub critical_path_s: f64,
    pub circuit: CircuitStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub program: String,
    pub circuit: QuantumCircuit,
    pub stats: CompileStats,
    pub pipeline: PassPipeline,
}

fn generic_only(circuit: &QuantumCircuit, pass: Pass) -> Result<(), CompileError> {
    if circuit.level != Level::Generic {
        return Err(CompileError::InvalidCircuit(format!("`{pass}` expects a generic circuit")));
    }
    Ok(())
}

/// Runs an explicit pass list. The list must end with the specific trio.
pub fn run_pipeline(
    circuit: &QuantumCircuit,
    passes: &[Pass],
    device: &DeviceProperties,
    snapshot: Option<&TelemetrySnapshot>,
    table: &DecompositionTable,
) -> Result<(QuantumCircuit, Vec<PassStat>, usize), CompileError> {
    let mut current = circuit.clone();
    let mut layout: Option<Layout> = None;
    let mut swaps = 0;
    let mut stats = Vec::with_capacity(passes.len());
    for &pass in passes {
        match pass {
            Pass::Cancel => {
                generic_only(&current, pass)?;
                current = cancel_inverse_pairs(&current);
            }
            Pass::CommuteReorder => {
                generic_only(&current, pass)?;
                current = commute_reorder(&current);
            }
            Pass::Fuse1q => {
                generic_only(&current, pass)?;
                current = fuse_1q(&current);
            }
            Pass::BasisTranslate => {
                generic_only(&current, pass)?;
                current = basis_translate(&current, &device.native_gates, table)?;
            }
            Pass::Place => layout = Some(place(&current, device, snapshot)?),
            Pass::Route => {
                if current.level != Level::Native || current.layout.is_some() {
                    return Err(CompileError::InvalidCircuit("route expects a translated, unrouted circuit".into()));
                }
                let layout = layout.as_ref().ok_or_else(|| CompileError::InvalidCircuit("route before place".into()))?;
                let routed = route(&current, layout, device, snapshot, table)?;
                swaps += routed.swaps;
                current = routed.circuit;
            }
        }
        stats.push(PassStat { pass, ops: current.ops.len(), depth: current.depth() });
    }
    if current.layout.is_none() {
        return Err(CompileError::InvalidCircuit("pipeline did not route the circuit".into()));
    }
    Ok((current, stats, swaps))
}

/// Compiles a generic circuit for one device with the named selection policy.
pub fn compile(
    circuit: &QuantumCircuit,
    device: &DeviceProperties,
    snapshot: &TelemetrySnapshot,
    policy: &str,
    registry: &SelectorRegistry,
) -> Result<Compiled, CompileError> {
    if circuit.level != Level::Generic {
        return Err(CompileError::InvalidCircuit("input must be a generic circuit".into()));
    }
    circuit.validate().map_err(|e| CompileError::InvalidCircuit(e.to_string()))?;
    if circuit.num_qubits > device.num_qubits {
        return Err(CompileError::TooWide { circuit: circuit.num_qubits, device: device.num_qubits });
    }
    let pipeline = registry.select_passes(circuit, &device.device_id, policy)?;
    let (native, passes, swap_count) =
        run_pipeline(circuit, &pipeline.passes, device, Some(snapshot), DecompositionTable::builtin())?;
    let program = emit_lowlevel(&native).map_err(|e| CompileError::InvalidCircuit(e.to_string()))?;
    let circuit_stats = CircuitStats::from_circuit(&native);
    let stats = CompileStats {
        input_ops: circuit.ops.len(),
        input_depth: circuit.depth(),
        passes,
        swap_count,
        esp_before: estimate_generic_success(circuit, snapshot),
        esp_after: estimate_success_probability(&native, snapshot).map_err(|e| CompileError::InvalidCircuit(e.to_string()))?,
        critical_path_s: circuit_stats.critical_path(|g| device.duration(g)),
        circuit: circuit_stats,
    };
    Ok(Compiled { program, circuit: native, stats, pipeline })
}
