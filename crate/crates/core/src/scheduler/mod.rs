//! Bi-level scheduling: device selection above, per-device priority queues
//! below, plus a reservation hook for co-scheduling with classical jobs.

pub mod des;
mod estimate;
mod pareto;
mod queue;

use crate::circuit::QuantumCircuit;
use crate::fomac::{environment_health, estimate_generic_success, FomacLimits};
use crate::qdmi::Qdmi;

pub use estimate::{estimate_execution_time, estimate_generic_execution_time, CircuitStats};
pub use pareto::{
    dominates, pareto_front, scalarize, select_from_candidates, DeviceCandidate, SchedulerError, SchedulingPolicy,
};
pub use queue::{Dequeued, DeviceQueue, QueueEntry, QueueError, Reservation};

/// One candidate per registered device wide enough for `circuit`, built from
/// live telemetry, queue state and pre-compilation circuit statistics.
pub fn build_candidates(qdmi: &Qdmi, circuit: &QuantumCircuit, shots: u64, limits: &FomacLimits) -> Vec<DeviceCandidate> {
    let stats = CircuitStats::from_circuit(circuit);
    let now = qdmi.now();
    qdmi.device_list()
        .into_iter()
        .filter_map(|id| {
            let props = qdmi.device_properties(&id).ok()?;
            if props.num_qubits < circuit.num_qubits {
                return None;
            }
            let snap = qdmi.telemetry(&id).ok()?;
            let (healthy, _) = environment_health(&snap, limits, now);
            Some(DeviceCandidate {
                est_wait_s: qdmi.estimate_wait(&id).ok()?,
                esp: estimate_generic_success(circuit, &snap),
                est_exec_s: estimate_generic_execution_time(&stats, &props, shots),
                healthy,
                device_id: id,
            })
        })
        .collect()
}

/// Chooses the device for a generic circuit; returns it with the candidates considered.
pub fn select_device(
    qdmi: &Qdmi,
    circuit: &QuantumCircuit,
    shots: u64,
    policy: &SchedulingPolicy,
    limits: &FomacLimits,
) -> Result<(String, Vec<DeviceCandidate>), SchedulerError> {
    let candidates = build_candidates(qdmi, circuit, shots, limits);
    let chosen = select_from_candidates(&candidates, policy)?;
    Ok((chosen, candidates))
}
