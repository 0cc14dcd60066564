//! Parser for the generic circuit source format, a strict subset of
//! OpenQASM 2.0. The grammar is written out in the README.

use std::collections::HashMap;

use super::angle::{scan_number, AngleExpr};
use super::{CircuitError, Gate, GateOp, QuantumCircuit};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, CircuitError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let column = text[line_start..i].chars().count() + 1;
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, column });
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                push(&mut out, Tok::Arrow);
                i += 2;
            }
            b';' | b',' | b'[' | b']' | b'(' | b')' | b'+' | b'-' | b'*' | b'/' => {
                push(&mut out, Tok::Sym(c as char));
                i += 1;
            }
            b'"' => {
                let start = i + 1;
                let end = bytes[start..]
                    .iter()
                    .position(|&b| b == b'"' || b == b'\n')
                    .map(|p| start + p)
                    .filter(|&e| bytes[e] == b'"')
                    .ok_or(CircuitError::Syntax { line, column, message: "unterminated string".into() })?;
                push(&mut out, Tok::Str(text[start..end].to_string()));
                i = end + 1;
            }
            c if c.is_ascii_digit() || c == b'.' => {
                let len = scan_number(&bytes[i..]);
                push(&mut out, Tok::Number(text[i..i + len].to_string()));
                i += len;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(text[start..i].to_string()));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap();
                return Err(CircuitError::Syntax { line, column, message: format!("unexpected character `{ch}`") });
            }
        }
    }
    Ok(out)
}

struct Register {
    offset: usize,
    size: usize,
}

/// A register reference: either one element or the whole register.
enum Arg {
    One(usize),
    Whole(Vec<usize>),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end_line: usize,
    qregs: HashMap<String, Register>,
    cregs: HashMap<String, Register>,
    circuit: QuantumCircuit,
}

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or((self.end_line, 1))
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, CircuitError> {
        let (line, column) = self.here();
        Err(CircuitError::Syntax { line, column, message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), CircuitError> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.syntax(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, CircuitError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.syntax("expected identifier"),
        }
    }

    fn integer(&mut self) -> Result<usize, CircuitError> {
        match self.peek() {
            Some(Tok::Number(s)) => match s.parse::<usize>() {
                Ok(v) => {
                    self.pos += 1;
                    Ok(v)
                }
                Err(_) => self.syntax(format!("expected non-negative integer, found `{s}`")),
            },
            _ => self.syntax("expected integer"),
        }
    }

    fn header(&mut self) -> Result<(), CircuitError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "OPENQASM" => self.pos += 1,
            _ => return self.syntax("expected `OPENQASM 2.0;` header"),
        }
        match self.peek() {
            Some(Tok::Number(v)) if v == "2.0" || v == "2" => self.pos += 1,
            _ => return self.syntax("only version 2.0 is supported"),
        }
        self.expect_sym(';')
    }

    fn statement(&mut self) -> Result<(), CircuitError> {
        let (line, column) = self.here();
        let word = self.ident()?;
        match word.as_str() {
            "include" => {
                match self.peek() {
                    Some(Tok::Str(_)) => self.pos += 1,
                    _ => return self.syntax("expected file name string"),
                }
                self.expect_sym(';')
            }
            "qreg" | "creg" => self.register_decl(word == "qreg"),
            "measure" => {
                let q = self.arg(true)?;
                if self.peek() != Some(&Tok::Arrow) {
                    return self.syntax("expected `->`");
                }
                self.pos += 1;
                let c = self.arg(false)?;
                self.expect_sym(';')?;
                let pairs: Vec<(usize, usize)> = match (q, c) {
                    (Arg::One(q), Arg::One(c)) => vec![(q, c)],
                    (Arg::Whole(qs), Arg::Whole(cs)) if qs.len() == cs.len() => qs.into_iter().zip(cs).collect(),
                    _ => {
                        return Err(CircuitError::Syntax {
                            line,
                            column,
                            message: "measure operands must both be elements or equal-size registers".into(),
                        })
                    }
                };
                for (q, c) in pairs {
                    self.add(GateOp::measure(q, c), line, column)?;
                }
                Ok(())
            }
            name => self.gate_statement(name, line, column),
        }
    }

    fn register_decl(&mut self, quantum: bool) -> Result<(), CircuitError> {
        let name = self.ident()?;
        self.expect_sym('[')?;
        let size = self.integer()?;
        self.expect_sym(']')?;
        self.expect_sym(';')?;
        if self.qregs.contains_key(&name) || self.cregs.contains_key(&name) {
            return self.syntax(format!("register `{name}` declared twice"));
        }
        if quantum {
            let offset = self.circuit.num_qubits;
            self.circuit.num_qubits += size;
            self.qregs.insert(name, Register { offset, size });
        } else {
            let offset = self.circuit.num_clbits;
            self.circuit.num_clbits += size;
            self.cregs.insert(name, Register { offset, size });
        }
        Ok(())
    }

    fn arg(&mut self, quantum: bool) -> Result<Arg, CircuitError> {
        let (line, column) = self.here();
        let name = self.ident()?;
        let regs = if quantum { &self.qregs } else { &self.cregs };
        let Some(reg) = regs.get(&name) else {
            let kind = if quantum { "quantum" } else { "classical" };
            return Err(CircuitError::Syntax { line, column, message: format!("unknown {kind} register `{name}`") });
        };
        let (offset, size) = (reg.offset, reg.size);
        if self.peek() != Some(&Tok::Sym('[')) {
            return Ok(Arg::Whole((offset..offset + size).collect()));
        }
        self.pos += 1;
        let (iline, icol) = self.here();
        let idx = self.integer()?;
        self.expect_sym(']')?;
        if idx >= size {
            return Err(CircuitError::Index {
                line: iline,
                column: icol,
                message: format!("{name}[{idx}] out of range for register of size {size}"),
            });
        }
        Ok(Arg::One(offset + idx))
    }

    fn params(&mut self) -> Result<Vec<f64>, CircuitError> {
        let mut params = Vec::new();
        if self.peek() != Some(&Tok::Sym('(')) {
            return Ok(params);
        }
        self.pos += 1;
        loop {
            // collect tokens of one expression and hand them to the angle parser
            let (line, column) = self.here();
            let mut depth = 0usize;
            let mut text = String::new();
            loop {
                match self.peek() {
                    None => return self.syntax("unterminated parameter list"),
                    Some(Tok::Sym(')')) if depth == 0 => break,
                    Some(Tok::Sym(',')) if depth == 0 => break,
                    Some(tok) => {
                        match tok {
                            Tok::Sym('(') => depth += 1,
                            Tok::Sym(')') => depth -= 1,
                            _ => {}
                        }
                        match tok {
                            Tok::Ident(s) | Tok::Number(s) => text.push_str(s),
                            Tok::Sym(c) => text.push(*c),
                            _ => return self.syntax("unexpected token in parameter"),
                        }
                        text.push(' ');
                        self.pos += 1;
                    }
                }
            }
            let value = AngleExpr::parse(&text)
                .map_err(|e| e.message)
                .and_then(|e| e.eval_const())
                .map_err(|message| CircuitError::Syntax { line, column, message })?;
            params.push(value);
            if self.peek() == Some(&Tok::Sym(',')) {
                self.pos += 1;
            } else {
                self.expect_sym(')')?;
                return Ok(params);
            }
        }
    }

    fn gate_statement(&mut self, name: &str, line: usize, column: usize) -> Result<(), CircuitError> {
        let gate = match name.parse::<Gate>() {
            Ok(g) if g.is_generic() => g,
            _ => return Err(CircuitError::UnsupportedGate { name: name.to_string(), line, column }),
        };
        let params = self.params()?;
        let mut args = vec![self.arg(true)?];
        while self.peek() == Some(&Tok::Sym(',')) {
            self.pos += 1;
            args.push(self.arg(true)?);
        }
        self.expect_sym(';')?;

        if gate == Gate::Barrier {
            let qubits: Vec<usize> = args
                .into_iter()
                .flat_map(|a| match a {
                    Arg::One(q) => vec![q],
                    Arg::Whole(qs) => qs,
                })
                .collect();
            return self.add(GateOp::new(gate, params, qubits), line, column);
        }

        // broadcast over whole-register operands
        let width = args.iter().find_map(|a| match a {
            Arg::Whole(qs) => Some(qs.len()),
            Arg::One(_) => None,
        });
        let Some(width) = width else {
            let qubits = args.iter().map(|a| if let Arg::One(q) = a { *q } else { unreachable!() }).collect();
            return self.add(GateOp::new(gate, params, qubits), line, column);
        };
        if args.iter().any(|a| matches!(a, Arg::Whole(qs) if qs.len() != width)) {
            return Err(CircuitError::Syntax { line, column, message: "register operands differ in size".into() });
        }
        for k in 0..width {
            let qubits = args
                .iter()
                .map(|a| match a {
                    Arg::One(q) => *q,
                    Arg::Whole(qs) => qs[k],
                })
                .collect();
            self.add(GateOp::new(gate, params.clone(), qubits), line, column)?;
        }
        Ok(())
    }

    fn add(&mut self, op: GateOp, line: usize, column: usize) -> Result<(), CircuitError> {
        self.circuit.push(op).map(|_| ()).map_err(|e| match e {
            CircuitError::InvalidOp(message) => CircuitError::Syntax { line, column, message },
            other => other,
        })
    }
}

/// Parses generic circuit source into a `GENERIC`-level circuit.
pub fn parse_circuit(text: &str) -> Result<QuantumCircuit, CircuitError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end_line: text.lines().count().max(1),
        qregs: HashMap::new(),
        cregs: HashMap::new(),
        circuit: QuantumCircuit::new(0, 0),
    };
    p.header()?;
    while p.pos < p.toks.len() {
        p.statement()?;
    }
    Ok(p.circuit)
}
