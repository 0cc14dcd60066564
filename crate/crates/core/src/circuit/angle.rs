//! Angle expressions: decimal literals, `pi`, named variables and `+ - * /`.
//!
//! Used for gate parameters in circuit source and for the symbolic parameters
//! of the decomposition table.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum AngleExpr {
    Num(f64),
    Pi,
    Var(String),
    Neg(Box<AngleExpr>),
    Add(Box<AngleExpr>, Box<AngleExpr>),
    Sub(Box<AngleExpr>, Box<AngleExpr>),
    Mul(Box<AngleExpr>, Box<AngleExpr>),
    Div(Box<AngleExpr>, Box<AngleExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleError {
    /// Byte offset into the expression text.
    pub offset: usize,
    pub message: String,
}

impl AngleExpr {
    pub fn parse(text: &str) -> Result<Self, AngleError> {
        let mut p = ExprParser { src: text.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn eval(&self, vars: &HashMap<String, f64>) -> Result<f64, String> {
        Ok(match self {
            AngleExpr::Num(v) => *v,
            AngleExpr::Pi => PI,
            AngleExpr::Var(name) => *vars
                .get(name)
                .ok_or_else(|| format!("unbound variable `{name}`"))?,
            AngleExpr::Neg(a) => -a.eval(vars)?,
            AngleExpr::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            AngleExpr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            AngleExpr::Mul(a, b) => a.eval(vars)? * b.eval(vars)?,
            AngleExpr::Div(a, b) => a.eval(vars)? / b.eval(vars)?,
        })
    }

    pub fn eval_const(&self) -> Result<f64, String> {
        self.eval(&HashMap::new())
    }

    fn write(&self, out: &mut String, parent_prec: u8) {
        let prec = self.precedence();
        let paren = prec < parent_prec;
        if paren {
            out.push('(');
        }
        match self {
            AngleExpr::Num(v) => out.push_str(&v.to_string()),
            AngleExpr::Pi => out.push_str("pi"),
            AngleExpr::Var(n) => out.push_str(n),
            AngleExpr::Neg(a) => {
                out.push('-');
                a.write(out, 3);
            }
            AngleExpr::Add(a, b) | AngleExpr::Sub(a, b) => {
                a.write(out, 1);
                out.push_str(if matches!(self, AngleExpr::Add(..)) { "+" } else { "-" });
                b.write(out, 2);
            }
            AngleExpr::Mul(a, b) | AngleExpr::Div(a, b) => {
                a.write(out, 2);
                out.push_str(if matches!(self, AngleExpr::Mul(..)) { "*" } else { "/" });
                b.write(out, 3);
            }
        }
        if paren {
            out.push(')');
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            AngleExpr::Add(..) | AngleExpr::Sub(..) => 1,
            AngleExpr::Mul(..) | AngleExpr::Div(..) => 2,
            AngleExpr::Neg(..) => 3,
            _ => 4,
        }
    }
}

impl std::fmt::Display for AngleExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = String::new();
        self.write(&mut s, 0);
        f.write_str(&s)
    }
}

impl Serialize for AngleExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AngleExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        AngleExpr::parse(&text).map_err(|e| serde::de::Error::custom(e.message))
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, msg: &str) -> AngleError {
        AngleError { offset: self.pos, message: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<AngleExpr, AngleError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' {
                AngleExpr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                AngleExpr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<AngleExpr, AngleError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == b'*' {
                AngleExpr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                AngleExpr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<AngleExpr, AngleError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(AngleExpr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<AngleExpr, AngleError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if ident == "pi" {
                    Ok(AngleExpr::Pi)
                } else {
                    Ok(AngleExpr::Var(ident.to_string()))
                }
            }
            Some(_) => Err(self.error("expected a number, `pi` or `(`")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<AngleExpr, AngleError> {
        let start = self.pos;
        let len = scan_number(&self.src[start..]);
        self.pos += len;
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(AngleExpr::Num)
            .map_err(|_| AngleError { offset: start, message: format!("malformed number `{text}`") })
    }
}

/// Length of the decimal literal (with optional exponent) at the start of `src`.
pub(crate) fn scan_number(src: &[u8]) -> usize {
    let mut i = 0;
    while i < src.len() && (src[i].is_ascii_digit() || src[i] == b'.') {
        i += 1;
    }
    if i < src.len() && (src[i] == b'e' || src[i] == b'E') {
        let mut j = i + 1;
        if j < src.len() && (src[j] == b'+' || src[j] == b'-') {
            j += 1;
        }
        if j < src.len() && src[j].is_ascii_digit() {
            while j < src.len() && src[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}
