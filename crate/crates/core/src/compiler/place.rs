//! Fidelity-aware initial placement.

use std::collections::VecDeque;

use super::CompileError;
use crate::circuit::{Layout, QuantumCircuit};
use crate::fomac::ClassAverages;
use crate::qdmi::{DeviceProperties, TelemetrySnapshot};

const EPS: f64 = 1e-12;

/// Hop distances between physical qubits; `usize::MAX` when unreachable.
pub fn distance_matrix(device: &DeviceProperties) -> Vec<Vec<usize>> {
    let adj = device.neighbors();
    let n = device.num_qubits;
    let mut dist = vec![vec![usize::MAX; n]; n];
    for (s, row) in dist.iter_mut().enumerate() {
        row[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    dist
}

/// Fidelity of the native entangler on a coupling edge, falling back to the
/// two-qubit class average, or 1.0 without telemetry.
pub fn edge_fidelity(device: &DeviceProperties, snapshot: Option<&TelemetrySnapshot>, a: usize, b: usize) -> f64 {
    let (Some(snap), Some(g)) = (snapshot, device.two_qubit_gate()) else { return 1.0 };
    snap.fidelity(g, &[a, b]).unwrap_or_else(|| ClassAverages::of(snap).two_qubit)
}

/// Two-qubit interaction counts between logical qubits.
fn interactions(circuit: &QuantumCircuit) -> Vec<Vec<usize>> {
    let n = circuit.num_qubits;
    let mut w = vec![vec![0; n]; n];
    for op in circuit.ops.iter().filter(|o| o.gate.is_unitary() && o.qubits.len() == 2) {
        let (a, b) = (op.qubits[0], op.qubits[1]);
        w[a][b] += 1;
        w[b][a] += 1;
    }
    w
}

/// Lexicographic "strictly better" over score tuples with a float tolerance.
fn better(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x > &(y + EPS) {
            return true;
        }
        if x < &(y - EPS) {
            return false;
        }
    }
    false
}

/// Greedy placement. Logical qubits go in order of two-qubit degree; each
/// takes the free physical qubit maximising, in order: summed fidelity of
/// coupling edges to already placed partners, closeness to those partners,
/// and the best free incident edge when partners are still unplaced. Ties go
/// to the lower physical index.
pub fn place(
    circuit: &QuantumCircuit,
    device: &DeviceProperties,
    snapshot: Option<&TelemetrySnapshot>,
) -> Result<Layout, CompileError> {
    let n = circuit.num_qubits;
    if n > device.num_qubits {
        return Err(CompileError::TooWide { circuit: n, device: device.num_qubits });
    }
    let w = interactions(circuit);
    let degree: Vec<usize> = w.iter().map(|row| row.iter().sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&l| (std::cmp::Reverse(degree[l]), l));

    let adj = device.neighbors();
    let dist = distance_matrix(device);
    let mut layout: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; device.num_qubits];
    for l in order {
        let placed: Vec<(usize, usize)> =
            (0..n).filter(|&m| w[l][m] > 0).filter_map(|m| layout[m].map(|p| (p, w[l][m]))).collect();
        let has_unplaced = (0..n).any(|m| w[l][m] > 0 && layout[m].is_none());
        let mut best: Option<(usize, [f64; 3])> = None;
        for p in (0..device.num_qubits).filter(|&p| !used[p]) {
            let covered: f64 = placed
                .iter()
                .filter(|(q, _)| device.is_coupled(p, *q))
                .map(|(q, _)| edge_fidelity(device, snapshot, p, *q))
                .sum();
            let spread: f64 = placed
                .iter()
                .map(|(q, count)| *count as f64 * dist[p][*q].min(device.num_qubits) as f64)
                .sum();
            let outlook = if has_unplaced {
                adj[p].iter().filter(|&&q| !used[q]).map(|&q| edge_fidelity(device, snapshot, p, q)).fold(0.0, f64::max)
            } else {
                0.0
            };
            let score = [covered, -spread, outlook];
            if best.as_ref().is_none_or(|(_, b)| better(&score, b)) {
                best = Some((p, score));
            }
        }
        let (p, _) = best.expect("width checked above");
        layout[l] = Some(p);
        used[p] = true;
    }
    Ok(Layout(layout.into_iter().map(|p| p.expect("every logical qubit placed")).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::qdmi::{Confusion, GateKey};
    use std::collections::{BTreeMap, BTreeSet};

    pub(crate) fn line(n: usize) -> DeviceProperties {
        DeviceProperties {
            device_id: "line".into(),
            display_name: "line".into(),
            num_qubits: n,
            native_gates: BTreeSet::from([Gate::Prx, Gate::Cz, Gate::Measure]),
            coupling_map: (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            gate_durations: BTreeMap::from([(Gate::Prx, 4e-8), (Gate::Cz, 8e-8)]),
            shot_overhead: 0.0,
            setup_overhead: 0.0,
        }
    }

    fn snapshot(device: &DeviceProperties, edge_fid: impl Fn(usize, usize) -> f64) -> TelemetrySnapshot {
        TelemetrySnapshot {
            device_id: device.device_id.clone(),
            taken_at: 0.0,
            gate_fidelity: device.coupling_map.iter().map(|&(a, b)| (GateKey::new(Gate::Cz, &[a, b]), edge_fid(a, b))).collect(),
            t1: BTreeMap::new(),
            t2: BTreeMap::new(),
            readout_fidelity: BTreeMap::new(),
            confusion: (0..device.num_qubits).map(|q| (q, Confusion::PERFECT)).collect(),
            temperature_mk: 10.0,
            calibrated_at: 0.0,
        }
    }

    fn pair_circuit() -> QuantumCircuit {
        let mut c = QuantumCircuit::new(2, 0);
        c.gate(Gate::Cx, &[], &[0, 1]).unwrap();
        c
    }

    #[test]
    fn uniform_all_to_all_gives_identity() {
        let mut d = line(5);
        d.coupling_map = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let snap = snapshot(&d, |_, _| 0.95);
        assert_eq!(place(&pair_circuit(), &d, Some(&snap)).unwrap(), Layout(vec![0, 1]));
    }

    #[test]
    fn pair_lands_on_best_edge() {
        let d = line(6);
        for best in 0..5 {
            let snap = snapshot(&d, |a, _| if a == best { 0.99 } else { 0.90 });
            let layout = place(&pair_circuit(), &d, Some(&snap)).unwrap();
            // exhaustive oracle over every placement of the pair
            let mut top = (f64::MIN, (0, 0));
            for a in 0..6 {
                for b in 0..6 {
                    let f = if d.is_coupled(a, b) { edge_fidelity(&d, Some(&snap), a, b) } else { 0.0 };
                    if a != b && f > top.0 {
                        top = (f, (a.min(b), a.max(b)));
                    }
                }
            }
            let (p0, p1) = (layout.physical(0), layout.physical(1));
            assert_eq!((p0.min(p1), p0.max(p1)), top.1);
        }
    }

    #[test]
    fn too_wide_rejected() {
        let c = QuantumCircuit::new(21, 0);
        assert_eq!(place(&c, &line(20), None), Err(CompileError::TooWide { circuit: 21, device: 20 }));
    }

    #[test]
    fn layouts_are_valid() {
        let d = line(7);
        let mut c = QuantumCircuit::new(5, 0);
        for (a, b) in [(0, 4), (4, 2), (1, 3), (3, 0), (2, 1)] {
            c.gate(Gate::Cz, &[], &[a, b]).unwrap();
        }
        let layout = place(&c, &d, None).unwrap();
        assert_eq!(layout.len(), 5);
        assert!(layout.is_valid(7));
    }
}
