//! Two-level circuit IR (generic and device-native), text formats and the
//! dense-unitary oracle.

mod angle;
mod gate;
mod lowlevel;
mod parse;
pub mod random;
pub mod unitary;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use angle::{AngleError, AngleExpr};
pub use gate::{Gate, UnknownGate, GENERIC_GATES};
pub use lowlevel::{emit_lowlevel, parse_lowlevel};
pub use parse::parse_circuit;
pub use unitary::{circuit_unitary, routed_equiv, routed_fidelity, unitary_equiv, UnitaryMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported gate `{name}` at {line}:{column}")]
    UnsupportedGate { name: String, line: usize, column: usize },
    #[error("index error at {line}:{column}: {message}")]
    Index { line: usize, column: usize, message: String },
    #[error("level error: {0}")]
    Level(String),
    #[error("invalid operation: {0}")]
    InvalidOp(String),
    #[error("circuit has {0} qubits, the unitary oracle is capped at 12")]
    TooLarge(usize),
    #[error("circuit contains measurements")]
    MeasurePresent,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Level {
    Generic,
    Native,
}

/// One gate application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub gate: Gate,
    pub params: Vec<f64>,
    pub qubits: Vec<usize>,
    pub clbits: Vec<usize>,
}

impl GateOp {
    pub fn new(gate: Gate, params: Vec<f64>, qubits: Vec<usize>) -> Self {
        GateOp { gate, params, qubits, clbits: Vec::new() }
    }

    pub fn measure(qubit: usize, clbit: usize) -> Self {
        GateOp { gate: Gate::Measure, params: Vec::new(), qubits: vec![qubit], clbits: vec![clbit] }
    }

    /// Checks arity, parameter count, finiteness and qubit distinctness.
    pub fn check(&self, num_qubits: usize, num_clbits: usize) -> Result<(), CircuitError> {
        let bad = |m: String| Err(CircuitError::InvalidOp(format!("{}: {m}", self.gate)));
        if self.params.len() != self.gate.num_params() {
            return bad(format!("expected {} params, got {}", self.gate.num_params(), self.params.len()));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return bad("non-finite parameter".into());
        }
        match self.gate.num_qubits() {
            Some(n) if n != self.qubits.len() => {
                return bad(format!("expected {n} qubits, got {}", self.qubits.len()))
            }
            None if self.qubits.is_empty() => return bad("barrier without qubits".into()),
            _ => {}
        }
        let distinct: BTreeSet<_> = self.qubits.iter().collect();
        if distinct.len() != self.qubits.len() {
            return bad("repeated qubit".into());
        }
        if let Some(q) = self.qubits.iter().find(|&&q| q >= num_qubits) {
            return bad(format!("qubit {q} out of range for width {num_qubits}"));
        }
        let expect_clbits = usize::from(self.gate == Gate::Measure);
        if self.clbits.len() != expect_clbits {
            return bad("clbits only allowed on measure".into());
        }
        if let Some(c) = self.clbits.iter().find(|&&c| c >= num_clbits) {
            return bad(format!("clbit {c} out of range for {num_clbits} clbits"));
        }
        Ok(())
    }

    pub fn touches(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }

    pub fn shares_qubit(&self, other: &GateOp) -> bool {
        self.qubits.iter().any(|q| other.qubits.contains(q))
    }
}

/// Bijective map from logical qubit (index) to physical qubit (value).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Layout(pub Vec<usize>);

impl Layout {
    pub fn identity(n: usize) -> Self {
        Layout((0..n).collect())
    }

    pub fn physical(&self, logical: usize) -> usize {
        self.0[logical]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Injective with image inside `0..num_physical`.
    pub fn is_valid(&self, num_physical: usize) -> bool {
        let image: BTreeSet<_> = self.0.iter().collect();
        image.len() == self.0.len() && self.0.iter().all(|&p| p < num_physical)
    }

    pub fn logical_of(&self, physical: usize) -> Option<usize> {
        self.0.iter().position(|&p| p == physical)
    }
}

/// A quantum kernel at either IR level.
///
/// At the native level `num_qubits` is the device width, ops address physical
/// qubits, `layout` is the initial logical→physical placement and
/// `final_layout` the placement after routing swaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCircuit {
    pub level: Level,
    pub num_qubits: usize,
    pub num_clbits: usize,
    pub ops: Vec<GateOp>,
    pub layout: Option<Layout>,
    pub final_layout: Option<Layout>,
    pub device: Option<String>,
}

impl QuantumCircuit {
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        QuantumCircuit {
            level: Level::Generic,
            num_qubits,
            num_clbits,
            ops: Vec::new(),
            layout: None,
            final_layout: None,
            device: None,
        }
    }

    /// Appends an op after checking it against the circuit width.
    pub fn push(&mut self, op: GateOp) -> Result<&mut Self, CircuitError> {
        op.check(self.num_qubits, self.num_clbits)?;
        if self.level == Level::Generic && !op.gate.is_generic() {
            return Err(CircuitError::Level(format!("`{}` is not a generic gate", op.gate)));
        }
        if op.gate == Gate::Measure && self.measured_clbits().contains(&op.clbits[0]) {
            return Err(CircuitError::InvalidOp(format!("clbit {} measured twice", op.clbits[0])));
        }
        self.ops.push(op);
        Ok(self)
    }

    pub fn gate(&mut self, gate: Gate, params: &[f64], qubits: &[usize]) -> Result<&mut Self, CircuitError> {
        self.push(GateOp::new(gate, params.to_vec(), qubits.to_vec()))
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// Full invariant check for the circuit's level.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut seen = BTreeSet::new();
        for op in &self.ops {
            op.check(self.num_qubits, self.num_clbits)?;
            if self.level == Level::Generic && !op.gate.is_generic() {
                return Err(CircuitError::Level(format!("`{}` in a generic circuit", op.gate)));
            }
            if op.gate == Gate::Measure && !seen.insert(op.clbits[0]) {
                return Err(CircuitError::InvalidOp(format!("clbit {} measured twice", op.clbits[0])));
            }
        }
        if self.level == Level::Native {
            for layout in self.layout.iter().chain(self.final_layout.iter()) {
                if !layout.is_valid(self.num_qubits) {
                    return Err(CircuitError::Level("layout is not injective onto device qubits".into()));
                }
            }
        }
        Ok(())
    }

    pub fn measured_clbits(&self) -> BTreeSet<usize> {
        self.ops
            .iter()
            .filter(|o| o.gate == Gate::Measure)
            .map(|o| o.clbits[0])
            .collect()
    }

    /// `(clbit, qubit)` pairs of every measurement, in op order.
    pub fn measurements(&self) -> Vec<(usize, usize)> {
        self.ops
            .iter()
            .filter(|o| o.gate == Gate::Measure)
            .map(|o| (o.clbits[0], o.qubits[0]))
            .collect()
    }

    /// Copy with measure ops removed.
    pub fn without_measurements(&self) -> QuantumCircuit {
        let mut c = self.clone();
        c.ops.retain(|o| o.gate != Gate::Measure);
        c
    }

    /// Sorted set of qubits touched by any op.
    pub fn active_qubits(&self) -> BTreeSet<usize> {
        self.ops.iter().flat_map(|o| o.qubits.iter().copied()).collect()
    }

    /// Circuit depth counting every op except barriers as one layer step.
    pub fn depth(&self) -> usize {
        let mut front = vec![0usize; self.num_qubits];
        let mut depth = 0;
        for op in &self.ops {
            let start = op.qubits.iter().map(|&q| front[q]).max().unwrap_or(0);
            let end = if op.gate == Gate::Barrier { start } else { start + 1 };
            for &q in &op.qubits {
                front[q] = end;
            }
            depth = depth.max(end);
        }
        depth
    }

    /// Renders a generic circuit in the source text format.
    pub fn to_source(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{}];\n", self.num_qubits));
        if self.num_clbits > 0 {
            out.push_str(&format!("creg c[{}];\n", self.num_clbits));
        }
        for op in &self.ops {
            out.push_str(op.gate.name());
            if !op.params.is_empty() {
                let p: Vec<String> = op.params.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("({})", p.join(",")));
            }
            let qs: Vec<String> = op.qubits.iter().map(|q| format!("q[{q}]")).collect();
            out.push(' ');
            out.push_str(&qs.join(","));
            if op.gate == Gate::Measure {
                out.push_str(&format!(" -> c[{}]", op.clbits[0]));
            }
            out.push_str(";\n");
        }
        out
    }
}
