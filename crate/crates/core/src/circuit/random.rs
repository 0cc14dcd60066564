//! Seeded random generic circuits for tests and benchmarks.

use std::f64::consts::FRAC_PI_4;

use rand::Rng;

use super::{Gate, GateOp, QuantumCircuit};

const UNITARY_GATES: &[Gate] = &[
    Gate::Id,
    Gate::X,
    Gate::Y,
    Gate::Z,
    Gate::H,
    Gate::S,
    Gate::Sdg,
    Gate::T,
    Gate::Tdg,
    Gate::Rx,
    Gate::Ry,
    Gate::Rz,
    Gate::Cx,
    Gate::Cz,
    Gate::Swap,
];

/// A generic circuit of `num_ops` unitary gates on `num_qubits` qubits.
///
/// About a third of the rotation angles are multiples of π/4 and ops are
/// often repeated or inverted right away, so optimisation passes have
/// something to find.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, num_qubits: usize, num_ops: usize) -> QuantumCircuit {
    assert!(num_qubits > 0, "random_circuit needs at least one qubit");
    let mut c = QuantumCircuit::new(num_qubits, 0);
    while c.ops.len() < num_ops {
        if let Some(last) = c.ops.last().filter(|_| rng.random_bool(0.15)).cloned() {
            let mut echo = last;
            if echo.gate.is_rotation() && rng.random_bool(0.5) {
                echo.params[0] = -echo.params[0];
            }
            c.ops.push(echo);
            continue;
        }
        let pool: Vec<Gate> =
            UNITARY_GATES.iter().copied().filter(|g| num_qubits > 1 || g.num_qubits() == Some(1)).collect();
        let gate = pool[rng.random_range(0..pool.len())];
        let params = (0..gate.num_params())
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.random_range(-8i32..=8) as f64 * FRAC_PI_4
                } else {
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                }
            })
            .collect();
        let a = rng.random_range(0..num_qubits);
        let qubits = if gate.num_qubits() == Some(2) {
            let b = (a + rng.random_range(1..num_qubits)) % num_qubits;
            vec![a, b]
        } else {
            vec![a]
        };
        c.ops.push(GateOp::new(gate, params, qubits));
    }
    c
}

/// Appends a measurement of every qubit into the clbit of the same index.
pub fn measure_all(circuit: &mut QuantumCircuit) {
    circuit.num_clbits = circuit.num_clbits.max(circuit.num_qubits);
    for q in 0..circuit.num_qubits {
        circuit.ops.push(GateOp::measure(q, q));
    }
}
