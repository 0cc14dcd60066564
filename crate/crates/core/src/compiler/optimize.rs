//! Device-agnostic rewrites on generic circuits.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::circuit::{Gate, GateOp, QuantumCircuit};

/// Rotations with a (2π-reduced) angle below this are dropped.
pub const ANGLE_EPS: f64 = 1e-12;

/// Reduces an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn same_qubits(a: &GateOp, b: &GateOp) -> bool {
    if a.qubits == b.qubits {
        return true;
    }
    a.gate.is_symmetric() && a.qubits.len() == 2 && b.qubits.len() == 2 && a.qubits[0] == b.qubits[1] && a.qubits[1] == b.qubits[0]
}

/// Whether `b` undoes `a` (same qubits, inverse gate).
pub fn is_inverse_pair(a: &GateOp, b: &GateOp) -> bool {
    use Gate::*;
    if !same_qubits(a, b) {
        return false;
    }
    match (a.gate, b.gate) {
        (H, H) | (X, X) | (Y, Y) | (Z, Z) | (Cx, Cx) | (Cz, Cz) | (Swap, Swap) => true,
        (S, Sdg) | (Sdg, S) | (T, Tdg) | (Tdg, T) => true,
        (Rx, Rx) | (Ry, Ry) | (Rz, Rz) => normalize_angle(a.params[0] + b.params[0]).abs() < ANGLE_EPS,
        _ => false,
    }
}

fn next_touching(ops: &[GateOp], removed: &[bool], i: usize) -> Option<usize> {
    (i + 1..ops.len()).find(|&j| !removed[j] && ops[j].shares_qubit(&ops[i]))
}

/// Removes inverse pairs with nothing in between on their qubits, to a fixpoint.
pub fn cancel_inverse_pairs(circuit: &QuantumCircuit) -> QuantumCircuit {
    let mut ops = circuit.ops.clone();
    loop {
        let mut removed = vec![false; ops.len()];
        let mut changed = false;
        for i in 0..ops.len() {
            if removed[i] {
                continue;
            }
            if let Some(j) = next_touching(&ops, &removed, i) {
                if is_inverse_pair(&ops[i], &ops[j]) {
                    removed[i] = true;
                    removed[j] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        ops = ops.into_iter().zip(removed).filter(|(_, r)| !r).map(|(o, _)| o).collect();
    }
    QuantumCircuit { ops, ..circuit.clone() }
}

fn z_family(g: Gate) -> bool {
    matches!(g, Gate::Z | Gate::S | Gate::Sdg | Gate::T | Gate::Tdg | Gate::Rz | Gate::Cz)
}

fn x_family(g: Gate) -> bool {
    matches!(g, Gate::X | Gate::Rx)
}

/// The commutation rule table.
pub fn commutes(a: &GateOp, b: &GateOp) -> bool {
    if !a.shares_qubit(b) {
        return true;
    }
    if z_family(a.gate) && z_family(b.gate) {
        return true;
    }
    x_family(a.gate) && x_family(b.gate) && a.qubits == b.qubits
}

/// Whether bringing `b` next to `a` lets a later pass remove or merge them.
fn is_partner(a: &GateOp, b: &GateOp) -> bool {
    if is_inverse_pair(a, b) {
        return true;
    }
    a.qubits.len() == 1 && a.qubits == b.qubits && b.gate.is_unitary() && b.qubits.len() == 1 && a.gate.is_unitary()
}

/// Moves ops rightwards across commuting neighbours until they sit next to a
/// later op they can cancel or fuse with.
pub fn commute_reorder(circuit: &QuantumCircuit) -> QuantumCircuit {
    let mut ops = circuit.ops.clone();
    let mut budget = ops.len() * ops.len();
    let mut i = 0;
    while i < ops.len() {
        let mut target = None;
        for k in i + 1..ops.len() {
            if !ops[k].shares_qubit(&ops[i]) {
                continue;
            }
            if is_partner(&ops[i], &ops[k]) {
                target = Some(k);
                break;
            }
            if !commutes(&ops[i], &ops[k]) {
                break;
            }
        }
        match target {
            Some(k) if k > i + 1 && k - 1 - i <= budget => {
                budget -= k - 1 - i;
                let op = ops.remove(i);
                ops.insert(k - 1, op);
                // the op that slid into slot i has not been examined yet
            }
            _ => i += 1,
        }
    }
    QuantumCircuit { ops, ..circuit.clone() }
}

type Mat2 = [Complex64; 4];

fn mat2(op: &GateOp) -> Mat2 {
    let m = op.gate.matrix(&op.params).expect("unitary single-qubit gate");
    [m[0], m[1], m[2], m[3]]
}

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Angles `(a, b, c)` with `U ∝ rz(a)·ry(b)·rz(c)`.
pub fn zyz_angles(u: &Mat2) -> (f64, f64, f64) {
    let det = u[0] * u[3] - u[1] * u[2];
    let v: Vec<Complex64> = u.iter().map(|x| x / det.sqrt()).collect();
    let b = 2.0 * v[2].norm().atan2(v[0].norm());
    let sum = if v[0].norm() > 1e-12 { -2.0 * v[0].arg() } else { 0.0 };
    let diff = if v[2].norm() > 1e-12 { 2.0 * v[2].arg() } else { 0.0 };
    ((sum + diff) / 2.0, b, (sum - diff) / 2.0)
}

/// Native-free ZYZ replacement in circuit order, with negligible angles elided.
pub fn zyz_ops(u: &Mat2, qubit: usize) -> Vec<GateOp> {
    let (a, b, c) = zyz_angles(u);
    let b = normalize_angle(b);
    let mut out = Vec::with_capacity(3);
    let push_rz = |theta: f64, out: &mut Vec<GateOp>| {
        let t = normalize_angle(theta);
        if t.abs() >= ANGLE_EPS {
            out.push(GateOp::new(Gate::Rz, vec![t], vec![qubit]));
        }
    };
    if b.abs() < ANGLE_EPS {
        push_rz(a + c, &mut out);
    } else {
        push_rz(c, &mut out);
        out.push(GateOp::new(Gate::Ry, vec![b], vec![qubit]));
        push_rz(a, &mut out);
    }
    out
}

/// Replaces each maximal run of single-qubit gates on one qubit by its ZYZ
/// form when that is strictly shorter.
pub fn fuse_1q(circuit: &QuantumCircuit) -> QuantumCircuit {
    let n = circuit.ops.len();
    let mut replace: Vec<Option<Vec<GateOp>>> = vec![None; n];
    let mut drop = vec![false; n];
    let mut runs: Vec<Vec<usize>> = vec![Vec::new(); circuit.num_qubits];

    let flush = |run: &mut Vec<usize>, q: usize, replace: &mut Vec<Option<Vec<GateOp>>>, drop: &mut Vec<bool>| {
        if run.len() >= 2 {
            let u = run
                .iter()
                .fold([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], |acc, &i| {
                    mul2(&mat2(&circuit.ops[i]), &acc)
                });
            let fused = zyz_ops(&u, q);
            if fused.len() < run.len() {
                for &i in run.iter() {
                    drop[i] = true;
                }
                replace[run[0]] = Some(fused);
            }
        }
        run.clear();
    };

    for (i, op) in circuit.ops.iter().enumerate() {
        if op.qubits.len() == 1 && op.gate.is_unitary() {
            runs[op.qubits[0]].push(i);
        } else {
            for &q in &op.qubits {
                flush(&mut runs[q], q, &mut replace, &mut drop);
            }
        }
    }
    for q in 0..circuit.num_qubits {
        flush(&mut runs[q], q, &mut replace, &mut drop);
    }

    let mut ops = Vec::with_capacity(n);
    for (i, op) in circuit.ops.iter().enumerate() {
        if let Some(r) = replace[i].take() {
            ops.extend(r);
        }
        if !drop[i] {
            ops.push(op.clone());
        }
    }
    QuantumCircuit { ops, ..circuit.clone() }
}
