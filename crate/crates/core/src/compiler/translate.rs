//! Basis translation driven by a checked-in decomposition table.
//!
//! Each rule rewrites one generic gate for a target gate set. Sequence
//! entries may name other generic gates; those are expanded again until
//! only gates of the device's native set remain.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CompileError;
use crate::circuit::{AngleExpr, Gate, GateOp, Level, QuantumCircuit};

const BUILTIN_TABLE: &str = include_str!("../../data/decompositions.json");
const MAX_EXPANSION_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleStep {
    pub gate: Gate,
    /// Angle expressions over the variable `theta`.
    pub params: Vec<AngleExpr>,
    /// Indices into the rewritten gate's qubits.
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRule {
    pub gate: Gate,
    pub target: BTreeSet<Gate>,
    pub sequence: Vec<RuleStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTable {
    pub version: u32,
    pub rules: Vec<DecompositionRule>,
}

impl DecompositionTable {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let table: DecompositionTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
        for (i, r) in table.rules.iter().enumerate() {
            let arity = r.gate.num_qubits().ok_or_else(|| format!("rule {i}: `{}` has no fixed arity", r.gate))?;
            for s in &r.sequence {
                if s.params.len() != s.gate.num_params() {
                    return Err(format!("rule {i}: `{}` takes {} params", s.gate, s.gate.num_params()));
                }
                if s.gate.num_qubits() != Some(s.qubits.len()) || s.qubits.iter().any(|&q| q >= arity) {
                    return Err(format!("rule {i}: bad qubit list for `{}`", s.gate));
                }
            }
        }
        Ok(table)
    }

    pub fn builtin() -> &'static DecompositionTable {
        static TABLE: OnceLock<DecompositionTable> = OnceLock::new();
        TABLE.get_or_init(|| DecompositionTable::from_json(BUILTIN_TABLE).expect("built-in decomposition table"))
    }

    /// First rule for `gate` whose target set the device supports.
    pub fn rule(&self, gate: Gate, native: &BTreeSet<Gate>) -> Option<&DecompositionRule> {
        self.rules.iter().find(|r| r.gate == gate && r.target.is_subset(native))
    }

    /// Instantiates one rule step for concrete parameters and qubits.
    pub fn instantiate(step: &RuleStep, theta: Option<f64>, qubits: &[usize]) -> Result<GateOp, String> {
        let mut vars = HashMap::new();
        if let Some(t) = theta {
            vars.insert("theta".to_string(), t);
        }
        let params = step.params.iter().map(|p| p.eval(&vars)).collect::<Result<Vec<f64>, String>>()?;
        Ok(GateOp::new(step.gate, params, step.qubits.iter().map(|&i| qubits[i]).collect()))
    }

    /// Rewrites one op into native gates.
    pub fn expand(&self, op: &GateOp, native: &BTreeSet<Gate>, out: &mut Vec<GateOp>) -> Result<(), CompileError> {
        self.expand_depth(op, native, out, 0)
    }

    fn expand_depth(&self, op: &GateOp, native: &BTreeSet<Gate>, out: &mut Vec<GateOp>, depth: usize) -> Result<(), CompileError> {
        if matches!(op.gate, Gate::Barrier | Gate::Measure) || native.contains(&op.gate) {
            out.push(op.clone());
            return Ok(());
        }
        let no_rule = || CompileError::NoDecomposition(op.gate);
        if depth >= MAX_EXPANSION_DEPTH {
            return Err(no_rule());
        }
        let rule = self.rule(op.gate, native).ok_or_else(no_rule)?;
        let theta = op.params.first().copied();
        for step in &rule.sequence {
            let sub = Self::instantiate(step, theta, &op.qubits).map_err(|_| no_rule())?;
            self.expand_depth(&sub, native, out, depth + 1)?;
        }
        Ok(())
    }
}

/// Rewrites every op into the native set. The result is marked native but
/// still addresses logical qubits (no layout yet).
pub fn basis_translate(
    circuit: &QuantumCircuit,
    native: &BTreeSet<Gate>,
    table: &DecompositionTable,
) -> Result<QuantumCircuit, CompileError> {
    let mut ops = Vec::with_capacity(circuit.ops.len() * 2);
    for op in &circuit.ops {
        table.expand(op, native, &mut ops)?;
    }
    Ok(QuantumCircuit { level: Level::Native, ops, ..circuit.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_unitary, unitary_equiv};
    use std::f64::consts::PI;

    fn unitary_of(ops: Vec<GateOp>, n: usize) -> crate::circuit::UnitaryMatrix {
        let c = QuantumCircuit { level: Level::Native, ops, ..QuantumCircuit::new(n, 0) };
        circuit_unitary(&c).unwrap()
    }

    /// Every rule, expanded to natives for its own target, matches the gate it replaces.
    #[test]
    fn every_rule_matches_its_gate() {
        let table = DecompositionTable::builtin();
        assert!(!table.rules.is_empty());
        for rule in &table.rules {
            let n = rule.gate.num_qubits().unwrap();
            let thetas: &[f64] = if rule.gate.num_params() == 1 { &[0.0, 0.3, -1.7, PI, 2.9] } else { &[0.0] };
            for &theta in thetas {
                let params: Vec<f64> = (0..rule.gate.num_params()).map(|_| theta).collect();
                let original = GateOp::new(rule.gate, params, (0..n).collect());
                // one rule application
                let direct: Vec<GateOp> = rule
                    .sequence
                    .iter()
                    .map(|s| DecompositionTable::instantiate(s, Some(theta), &original.qubits).unwrap())
                    .collect();
                let want = unitary_of(vec![original.clone()], n);
                assert!(unitary_equiv(&want, &unitary_of(direct, n), 1e-9).unwrap(), "{:?} θ={theta}", rule.gate);
                // full expansion to the target set
                let mut ops = Vec::new();
                table.expand(&original, &rule.target, &mut ops).unwrap();
                assert!(ops.iter().all(|o| rule.target.contains(&o.gate)));
                assert!(unitary_equiv(&want, &unitary_of(ops, n), 1e-9).unwrap(), "{:?} θ={theta}", rule.gate);
            }
        }
    }

    #[test]
    fn both_device_sets_cover_the_generic_gates() {
        let table = DecompositionTable::builtin();
        for native in [
            BTreeSet::from([Gate::Prx, Gate::Cz, Gate::Measure]),
            BTreeSet::from([Gate::Rz, Gate::Rx, Gate::Rxx, Gate::Measure]),
        ] {
            for g in crate::circuit::GENERIC_GATES {
                let Some(n) = g.num_qubits() else { continue };
                let op = GateOp::new(*g, vec![0.4; g.num_params()], (0..n).collect());
                let mut out = Vec::new();
                table.expand(&op, &native, &mut out).unwrap_or_else(|e| panic!("{g}: {e}"));
                assert!(out.iter().all(|o| native.contains(&o.gate)), "{g}");
            }
        }
    }

    #[test]
    fn native_circuit_unchanged_and_missing_rule_reported() {
        let native = BTreeSet::from([Gate::Rz, Gate::Rx, Gate::Rxx, Gate::Measure]);
        let mut c = QuantumCircuit::new(2, 1);
        c.gate(Gate::Rz, &[0.2], &[0]).unwrap().gate(Gate::Rx, &[0.1], &[1]).unwrap();
        c.push(GateOp::measure(1, 0)).unwrap();
        let t = basis_translate(&c, &native, DecompositionTable::builtin()).unwrap();
        assert_eq!(t.ops, c.ops);
        assert_eq!(t.level, Level::Native);

        let only_rz = BTreeSet::from([Gate::Rz]);
        let mut h = QuantumCircuit::new(1, 0);
        h.gate(Gate::H, &[], &[0]).unwrap();
        assert_eq!(
            basis_translate(&h, &only_rz, DecompositionTable::builtin()),
            Err(CompileError::NoDecomposition(Gate::H))
        );
    }

    #[test]
    fn malformed_tables_rejected() {
        let bad = r#"{"version":1,"rules":[{"gate":"x","target":["prx"],"sequence":[{"gate":"prx","params":["pi"],"qubits":[0]}]}]}"#;
        assert!(DecompositionTable::from_json(bad).is_err());
        let bad = r#"{"version":1,"rules":[{"gate":"x","target":["prx"],"sequence":[{"gate":"prx","params":["pi","0"],"qubits":[1]}]}]}"#;
        assert!(DecompositionTable::from_json(bad).is_err());
    }
}
