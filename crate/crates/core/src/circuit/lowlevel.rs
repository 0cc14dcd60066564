//! Execution-ready textual form of native circuits.
//!
//! ```text
//! ; ministack lowlevel v1
//! ; device sc20
//! ; qubits 20
//! ; clbits 2
//! ; layout 0->3 1->4
//! ; final 0->4 1->3
//! prx 3.141592653589793 0 q3
//! cz q3 q4
//! measure q3 c0
//! ```

use super::{CircuitError, Gate, GateOp, Layout, Level, QuantumCircuit};

const MAGIC: &str = "; ministack lowlevel v1";

fn write_layout(out: &mut String, key: &str, layout: &Layout) {
    out.push_str("; ");
    out.push_str(key);
    for (l, p) in layout.0.iter().enumerate() {
        out.push_str(&format!(" {l}->{p}"));
    }
    out.push('\n');
}

/// Emits a native circuit, one instruction per line.
pub fn emit_lowlevel(circuit: &QuantumCircuit) -> Result<String, CircuitError> {
    if circuit.level != Level::Native {
        return Err(CircuitError::Level("emit_lowlevel requires a native circuit".into()));
    }
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("; device {}\n", circuit.device.as_deref().unwrap_or("-")));
    out.push_str(&format!("; qubits {}\n; clbits {}\n", circuit.num_qubits, circuit.num_clbits));
    if let Some(l) = &circuit.layout {
        write_layout(&mut out, "layout", l);
    }
    if let Some(l) = &circuit.final_layout {
        write_layout(&mut out, "final", l);
    }
    for op in &circuit.ops {
        out.push_str(op.gate.name());
        for p in &op.params {
            out.push_str(&format!(" {p}"));
        }
        for q in &op.qubits {
            out.push_str(&format!(" q{q}"));
        }
        for c in &op.clbits {
            out.push_str(&format!(" c{c}"));
        }
        out.push('\n');
    }
    Ok(out)
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> CircuitError {
    CircuitError::Syntax { line, column, message: message.into() }
}

fn parse_layout(words: &[&str], line: usize) -> Result<Layout, CircuitError> {
    let mut pairs = Vec::new();
    for w in words {
        let (l, p) = w
            .split_once("->")
            .and_then(|(l, p)| Some((l.parse::<usize>().ok()?, p.parse::<usize>().ok()?)))
            .ok_or_else(|| syntax(line, 1, format!("malformed layout entry `{w}`")))?;
        pairs.push((l, p));
    }
    pairs.sort();
    if pairs.iter().enumerate().any(|(i, &(l, _))| i != l) {
        return Err(syntax(line, 1, "layout must list logical qubits 0..n"));
    }
    Ok(Layout(pairs.into_iter().map(|(_, p)| p).collect()))
}

/// Parses the low-level form back into a native circuit.
pub fn parse_lowlevel(text: &str) -> Result<QuantumCircuit, CircuitError> {
    let mut circuit = QuantumCircuit::new(0, 0);
    circuit.level = Level::Native;
    let mut saw_magic = false;
    let mut saw_qubits = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(';') {
            if trimmed == MAGIC {
                saw_magic = true;
                continue;
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            let num = |w: Option<&&str>| {
                w.and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| syntax(line, 1, "expected a count"))
            };
            match words.first().copied() {
                Some("device") => {
                    circuit.device = match words.get(1) {
                        Some(&"-") | None => None,
                        Some(d) => Some(d.to_string()),
                    }
                }
                Some("qubits") => {
                    circuit.num_qubits = num(words.get(1))?;
                    saw_qubits = true;
                }
                Some("clbits") => circuit.num_clbits = num(words.get(1))?,
                Some("layout") => circuit.layout = Some(parse_layout(&words[1..], line)?),
                Some("final") => circuit.final_layout = Some(parse_layout(&words[1..], line)?),
                _ => {} // free comment
            }
            continue;
        }
        if !saw_magic || !saw_qubits {
            return Err(syntax(line, 1, "missing low-level header"));
        }
        let mut words = trimmed.split_whitespace();
        let name = words.next().unwrap();
        let gate: Gate = name
            .parse()
            .map_err(|_| CircuitError::UnsupportedGate { name: name.to_string(), line, column: 1 })?;
        let mut op = GateOp::new(gate, Vec::new(), Vec::new());
        for w in words {
            let column = raw.find(w).map(|c| c + 1).unwrap_or(1);
            if let Some(q) = w.strip_prefix('q') {
                op.qubits.push(q.parse().map_err(|_| syntax(line, column, format!("bad qubit `{w}`")))?);
            } else if let Some(c) = w.strip_prefix('c') {
                op.clbits.push(c.parse().map_err(|_| syntax(line, column, format!("bad clbit `{w}`")))?);
            } else if op.qubits.is_empty() {
                op.params.push(w.parse().map_err(|_| syntax(line, column, format!("bad parameter `{w}`")))?);
            } else {
                return Err(syntax(line, column, format!("unexpected `{w}`")));
            }
        }
        op.check(circuit.num_qubits, circuit.num_clbits)
            .map_err(|e| syntax(line, 1, e.to_string()))?;
        circuit.ops.push(op);
    }
    if !saw_magic {
        return Err(syntax(1, 1, "missing low-level header"));
    }
    circuit.validate()?;
    Ok(circuit)
}
