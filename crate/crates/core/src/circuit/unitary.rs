//! Dense-unitary oracle used by the equivalence checks.
//!
//! Gates are embedded element-wise (`U_emb[r][r']` is nonzero only where `r`
//! and `r'` agree outside the gate's qubits) and multiplied into the running
//! product. This is deliberately a different code path from the simulator's
//! strided in-place update.

use std::collections::BTreeSet;

use num_complex::Complex64;

use super::{CircuitError, Gate, GateOp, QuantumCircuit};

pub const MAX_ORACLE_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    pub dim: usize,
    /// Row-major.
    pub entries: Vec<Complex64>,
}

impl UnitaryMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        UnitaryMatrix { dim, entries }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// `self · other`.
    pub fn mul(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.entries[i * d + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.entries[k * d + j];
                }
            }
        }
        UnitaryMatrix { dim: d, entries: out }
    }

    pub fn dagger(&self) -> UnitaryMatrix {
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                out[j * d + i] = self.entries[i * d + j].conj();
            }
        }
        UnitaryMatrix { dim: d, entries: out }
    }

    pub fn scale(&self, s: Complex64) -> UnitaryMatrix {
        UnitaryMatrix { dim: self.dim, entries: self.entries.iter().map(|e| e * s).collect() }
    }

    /// `max |U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.dagger().mul(self);
        let id = UnitaryMatrix::identity(self.dim);
        p.entries
            .iter()
            .zip(&id.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Left-multiplies the `dim × cols` row-major matrix `m` by the gate embedded
/// on `positions` (bit positions inside the row index).
fn apply_embedded(m: &[Complex64], cols: usize, gate: &[Complex64], positions: &[usize]) -> Vec<Complex64> {
    let dim = m.len() / cols;
    let k = positions.len();
    let local_dim = 1usize << k;
    let mask: usize = positions.iter().map(|&p| 1usize << p).sum();
    let mut out = vec![Complex64::new(0.0, 0.0); m.len()];
    for r in 0..dim {
        let base = r & !mask;
        let row_local = positions
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &p)| acc | (((r >> p) & 1) << j));
        for l in 0..local_dim {
            let coeff = gate[row_local * local_dim + l];
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            let src = positions
                .iter()
                .enumerate()
                .fold(base, |acc, (j, &p)| acc | (((l >> j) & 1) << p));
            let (dst_row, src_row) = (&mut out[r * cols..(r + 1) * cols], &m[src * cols..(src + 1) * cols]);
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += coeff * s;
            }
        }
    }
    out
}

fn apply_ops(mut m: Vec<Complex64>, cols: usize, ops: &[GateOp], position: impl Fn(usize) -> usize) -> Vec<Complex64> {
    for op in ops {
        let Some(g) = op.gate.matrix(&op.params) else { continue };
        let positions: Vec<usize> = op.qubits.iter().map(|&q| position(q)).collect();
        m = apply_embedded(&m, cols, &g, &positions);
    }
    m
}

/// Unitary of a measurement-free circuit; the rightmost factor is the first op.
pub fn circuit_unitary(circuit: &QuantumCircuit) -> Result<UnitaryMatrix, CircuitError> {
    if circuit.num_qubits > MAX_ORACLE_QUBITS {
        return Err(CircuitError::TooLarge(circuit.num_qubits));
    }
    if circuit.ops.iter().any(|o| o.gate == Gate::Measure) {
        return Err(CircuitError::MeasurePresent);
    }
    let dim = 1usize << circuit.num_qubits;
    let id = UnitaryMatrix::identity(dim);
    let entries = apply_ops(id.entries, dim, &circuit.ops, |q| q);
    Ok(UnitaryMatrix { dim, entries })
}

/// Global-phase-invariant equality: `|tr(A†B)| / dim ≥ 1 − tol`.
pub fn unitary_equiv(a: &UnitaryMatrix, b: &UnitaryMatrix, tol: f64) -> Result<bool, CircuitError> {
    if a.dim != b.dim {
        return Err(CircuitError::DimMismatch(a.dim, b.dim));
    }
    let tr: Complex64 = a.entries.iter().zip(&b.entries).map(|(x, y)| x.conj() * y).sum();
    Ok(tr.norm() / a.dim as f64 >= 1.0 - tol)
}

/// Fidelity of a routed native circuit against its logical source.
///
/// Logical basis states are placed on the physical qubits named by the initial
/// layout (all other physical qubits in |0>), the native circuit is applied and
/// the result is compared with the logical unitary read out through the final
/// layout. Returns `|Σ_x <expected_x|actual_x>| / 2^n`, which is 1 exactly
/// when the two agree up to global phase on the placed subspace.
pub fn routed_fidelity(logical: &QuantumCircuit, native: &QuantumCircuit) -> Result<f64, CircuitError> {
    let logical = logical.without_measurements();
    let native = native.without_measurements();
    let initial = native
        .layout
        .as_ref()
        .ok_or_else(|| CircuitError::Level("native circuit has no layout".into()))?;
    let fin = native.final_layout.as_ref().unwrap_or(initial);
    if initial.len() != logical.num_qubits || fin.len() != logical.num_qubits {
        return Err(CircuitError::DimMismatch(initial.len(), logical.num_qubits));
    }
    let mut active: BTreeSet<usize> = native.active_qubits();
    active.extend(initial.0.iter().copied());
    active.extend(fin.0.iter().copied());
    if active.len() > 16 {
        return Err(CircuitError::TooLarge(active.len()));
    }
    let compact: Vec<usize> = active.into_iter().collect();
    let pos = |p: usize| compact.binary_search(&p).expect("active qubit");
    let n = logical.num_qubits;
    let cols = 1usize << n;
    let dim = 1usize << compact.len();
    let embed = |x: usize, layout: &super::Layout| {
        (0..n).fold(0usize, |acc, i| acc | (((x >> i) & 1) << pos(layout.physical(i))))
    };

    let mut m = vec![Complex64::new(0.0, 0.0); dim * cols];
    for x in 0..cols {
        m[embed(x, initial) * cols + x] = Complex64::new(1.0, 0.0);
    }
    let got = apply_ops(m, cols, &native.ops, pos);
    let u = circuit_unitary(&logical)?;
    let mut overlap = Complex64::new(0.0, 0.0);
    for x in 0..cols {
        for y in 0..cols {
            overlap += u.get(y, x).conj() * got[embed(y, fin) * cols + x];
        }
    }
    Ok(overlap.norm() / cols as f64)
}

/// `routed_fidelity ≥ 1 − tol`.
pub fn routed_equiv(logical: &QuantumCircuit, native: &QuantumCircuit, tol: f64) -> Result<bool, CircuitError> {
    Ok(routed_fidelity(logical, native)? >= 1.0 - tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Layout, Level};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hadamard_matrix() {
        let mut circ = QuantumCircuit::new(1, 0);
        circ.gate(Gate::H, &[], &[0]).unwrap();
        let u = circuit_unitary(&circ).unwrap();
        let h = FRAC_1_SQRT_2;
        let expect = [c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)];
        for (a, b) in u.entries.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn empty_is_identity() {
        let u = circuit_unitary(&QuantumCircuit::new(2, 0)).unwrap();
        assert_eq!(u, UnitaryMatrix::identity(4));
    }

    #[test]
    fn bell_columns() {
        let mut circ = QuantumCircuit::new(2, 0);
        circ.gate(Gate::H, &[], &[0]).unwrap().gate(Gate::Cx, &[], &[0, 1]).unwrap();
        let u = circuit_unitary(&circ).unwrap();
        // column 0 is (|00> + |11>)/√2 with qubit 0 as the low bit
        let h = FRAC_1_SQRT_2;
        assert!((u.get(0, 0) - c(h, 0.0)).norm() < 1e-15);
        assert!((u.get(3, 0) - c(h, 0.0)).norm() < 1e-15);
        assert!(u.get(1, 0).norm() < 1e-15 && u.get(2, 0).norm() < 1e-15);
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn limits() {
        assert_eq!(circuit_unitary(&QuantumCircuit::new(13, 0)), Err(CircuitError::TooLarge(13)));
        let mut m = QuantumCircuit::new(1, 1);
        m.push(GateOp::measure(0, 0)).unwrap();
        assert_eq!(circuit_unitary(&m), Err(CircuitError::MeasurePresent));
        assert!(unitary_equiv(&UnitaryMatrix::identity(2), &UnitaryMatrix::identity(4), 1e-9).is_err());
    }

    #[test]
    fn phase_invariance() {
        let mut circ = QuantumCircuit::new(2, 0);
        circ.gate(Gate::Ry, &[0.4], &[1]).unwrap().gate(Gate::Cz, &[], &[0, 1]).unwrap();
        let u = circuit_unitary(&circ).unwrap();
        let phased = u.scale(Complex64::from_polar(1.0, PI / 7.0));
        assert!(unitary_equiv(&u, &phased, 1e-9).unwrap());
        assert!(unitary_equiv(&phased, &u, 1e-9).unwrap());
        let mut x = QuantumCircuit::new(1, 0);
        x.gate(Gate::X, &[], &[0]).unwrap();
        assert!(!unitary_equiv(&UnitaryMatrix::identity(2), &circuit_unitary(&x).unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn routed_identity_embedding() {
        let mut logical = QuantumCircuit::new(2, 0);
        logical.gate(Gate::Cx, &[], &[0, 1]).unwrap();
        // placed on physical 2 and 0 of a 3-qubit device
        let mut native = QuantumCircuit::new(3, 0);
        native.level = Level::Native;
        native.layout = Some(Layout(vec![2, 0]));
        native.ops.push(GateOp::new(Gate::Cx, vec![], vec![2, 0]));
        assert!(routed_equiv(&logical, &native, 1e-9).unwrap());
        native.ops[0].qubits = vec![0, 2];
        assert!(!routed_equiv(&logical, &native, 1e-9).unwrap());
    }

    #[test]
    fn routed_with_final_permutation() {
        let mut logical = QuantumCircuit::new(2, 0);
        logical.gate(Gate::X, &[], &[0]).unwrap();
        let mut native = QuantumCircuit::new(2, 0);
        native.level = Level::Native;
        native.layout = Some(Layout(vec![0, 1]));
        native.final_layout = Some(Layout(vec![1, 0]));
        native.ops.push(GateOp::new(Gate::X, vec![], vec![0]));
        native.ops.push(GateOp::new(Gate::Swap, vec![], vec![0, 1]));
        assert!(routed_equiv(&logical, &native, 1e-9).unwrap());
        native.final_layout = None;
        assert!(!routed_equiv(&logical, &native, 1e-9).unwrap());
    }
}
