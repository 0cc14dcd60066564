//! Shortest-path swap insertion with a short search over upcoming ops.

use super::place::{distance_matrix, edge_fidelity};
use super::translate::DecompositionTable;
use super::CompileError;
use crate::circuit::{Gate, GateOp, Layout, Level, QuantumCircuit};
use crate::qdmi::{DeviceProperties, TelemetrySnapshot};

const LOOKAHEAD: usize = 10;
const DECAY: f64 = 0.7;
const PLAN_DEPTH: usize = 3;

/// A routed circuit plus the number of swaps it needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub circuit: QuantumCircuit,
    pub swaps: usize,
}

/// Every shortest path from `src` to `dst`, in lexicographic order.
pub fn shortest_paths(device: &DeviceProperties, dist: &[Vec<usize>], src: usize, dst: usize) -> Vec<Vec<usize>> {
    let adj = device.neighbors();
    let mut out = Vec::new();
    let mut path = vec![src];
    fn walk(adj: &[Vec<usize>], dist: &[Vec<usize>], dst: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == dst {
            out.push(path.clone());
            return;
        }
        for &v in &adj[u] {
            if dist[v][dst] != usize::MAX && dist[v][dst] + 1 == dist[u][dst] {
                path.push(v);
                walk(adj, dist, dst, path, out);
                path.pop();
            }
        }
    }
    if dist[src][dst] != usize::MAX {
        walk(&adj, dist, dst, &mut path, &mut out);
    }
    out
}

/// Shortest path with the highest product of edge fidelities; ties keep the
/// lexicographically smallest.
pub fn best_path(
    device: &DeviceProperties,
    snapshot: Option<&TelemetrySnapshot>,
    dist: &[Vec<usize>],
    src: usize,
    dst: usize,
) -> Option<Vec<usize>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in shortest_paths(device, dist, src, dst) {
        let f: f64 = p.windows(2).map(|e| edge_fidelity(device, snapshot, e[0], e[1])).product();
        if best.as_ref().is_none_or(|(bf, _)| f > bf + 1e-12) {
            best = Some((f, p));
        }
    }
    best.map(|(_, p)| p)
}

struct State {
    l2p: Vec<usize>,
    p2l: Vec<Option<usize>>,
}

impl State {
    fn swap(&mut self, a: usize, b: usize) {
        let (la, lb) = (self.p2l[a], self.p2l[b]);
        self.p2l[a] = lb;
        self.p2l[b] = la;
        if let Some(l) = la {
            self.l2p[l] = b;
        }
        if let Some(l) = lb {
            self.l2p[l] = a;
        }
    }
}

/// Routes a basis-translated circuit onto the device from `layout`.
///
/// Two-qubit ops on uncoupled qubits get swaps along the best shortest path;
/// how the swaps are split between the two ends is chosen by searching the
/// splits of the next few blocked ops. The result is native, device-wide,
/// and carries the initial and final layouts.
pub fn route(
    circuit: &QuantumCircuit,
    layout: &Layout,
    device: &DeviceProperties,
    snapshot: Option<&TelemetrySnapshot>,
    table: &DecompositionTable,
) -> Result<Routed, CompileError> {
    if layout.len() != circuit.num_qubits || !layout.is_valid(device.num_qubits) {
        return Err(CompileError::InvalidCircuit("layout does not fit the circuit and device".into()));
    }
    let dist = distance_matrix(device);
    let mut state = State { l2p: layout.0.clone(), p2l: vec![None; device.num_qubits] };
    for (l, &p) in layout.0.iter().enumerate() {
        state.p2l[p] = Some(l);
    }
    let two_q: Vec<usize> = (0..circuit.ops.len())
        .filter(|&i| circuit.ops[i].gate.is_unitary() && circuit.ops[i].qubits.len() == 2)
        .collect();

    let mut ops = Vec::with_capacity(circuit.ops.len());
    let mut swaps = 0;
    let mut next_2q = 0;
    for (i, op) in circuit.ops.iter().enumerate() {
        if next_2q < two_q.len() && two_q[next_2q] == i {
            next_2q += 1;
            let (pa, pb) = (state.l2p[op.qubits[0]], state.l2p[op.qubits[1]]);
            if !device.is_coupled(pa, pb) {
                let path = best_path(device, snapshot, &dist, pa, pb).ok_or(CompileError::DisconnectedDevice(pa, pb))?;
                let k = path.len() - 1;
                let planner = Planner { circuit, two_q: &two_q, device, snapshot, dist: &dist, end: two_q.len().min(next_2q + LOOKAHEAD) };
                let mut best_split = (f64::INFINITY, 0);
                for split in 0..k {
                    let mut trial = State { l2p: state.l2p.clone(), p2l: state.p2l.clone() };
                    for (a, b) in swap_edges(&path, split) {
                        trial.swap(a, b);
                    }
                    let cost = planner.cost(&trial, next_2q, PLAN_DEPTH);
                    if cost < best_split.0 - 1e-12 {
                        best_split = (cost, split);
                    }
                }
                for (a, b) in swap_edges(&path, best_split.1) {
                    table.expand(&GateOp::new(Gate::Swap, vec![], vec![a, b]), &device.native_gates, &mut ops)?;
                    state.swap(a, b);
                    swaps += 1;
                }
            }
        }
        let mut mapped = op.clone();
        mapped.qubits = op.qubits.iter().map(|&l| state.l2p[l]).collect();
        ops.push(mapped);
    }
    Ok(Routed {
        circuit: QuantumCircuit {
            level: Level::Native,
            num_qubits: device.num_qubits,
            num_clbits: circuit.num_clbits,
            ops,
            layout: Some(layout.clone()),
            final_layout: Some(Layout(state.l2p)),
            device: Some(device.device_id.clone()),
        },
        swaps,
    })
}

/// Estimates the swaps the upcoming two-qubit ops will need by trying every
/// split for the next few blocked ops, then a decayed distance sum beyond.
struct Planner<'a> {
    circuit: &'a QuantumCircuit,
    two_q: &'a [usize],
    device: &'a DeviceProperties,
    snapshot: Option<&'a TelemetrySnapshot>,
    dist: &'a [Vec<usize>],
    end: usize,
}

impl Planner<'_> {
    fn pair(&self, state: &State, j: usize) -> (usize, usize) {
        let q = &self.circuit.ops[self.two_q[j]].qubits;
        (state.l2p[q[0]], state.l2p[q[1]])
    }

    fn cost(&self, state: &State, from: usize, depth: usize) -> f64 {
        let Some(j) = (from..self.end).find(|&j| {
            let (a, b) = self.pair(state, j);
            !self.device.is_coupled(a, b)
        }) else {
            return 0.0;
        };
        let (a, b) = self.pair(state, j);
        let path = match best_path(self.device, self.snapshot, self.dist, a, b) {
            Some(p) if depth > 0 => p,
            _ => {
                return (j..self.end)
                    .enumerate()
                    .map(|(rank, i)| {
                        let (a, b) = self.pair(state, i);
                        DECAY.powi(rank as i32) * self.dist[a][b].saturating_sub(1) as f64
                    })
                    .sum()
            }
        };
        let k = path.len() - 1;
        (0..k)
            .map(|split| {
                let mut trial = State { l2p: state.l2p.clone(), p2l: state.p2l.clone() };
                for (a, b) in swap_edges(&path, split) {
                    trial.swap(a, b);
                }
                (k - 1) as f64 + self.cost(&trial, j + 1, depth - 1)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Swaps that move the start of `path` forward `split` hops and the end back
/// the remaining hops, leaving the two endpoints' contents adjacent.
fn swap_edges(path: &[usize], split: usize) -> Vec<(usize, usize)> {
    let k = path.len() - 1;
    let mut out: Vec<(usize, usize)> = (0..split).map(|j| (path[j], path[j + 1])).collect();
    out.extend((0..k - 1 - split).map(|j| (path[k - j], path[k - j - 1])));
    out
}
