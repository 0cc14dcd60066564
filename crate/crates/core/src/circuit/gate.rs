use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Every gate identifier known to the stack, generic and device-native.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Id,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Rx,
    Ry,
    Rz,
    Cx,
    Cz,
    Swap,
    Barrier,
    Measure,
    Prx,
    Rxx,
}

/// The generic gate set accepted in source circuits.
pub const GENERIC_GATES: &[Gate] = &[
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
    Gate::Barrier,
    Gate::Measure,
];

const ALL_GATES: &[Gate] = &[
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
    Gate::Barrier,
    Gate::Measure,
    Gate::Prx,
    Gate::Rxx,
];

impl Gate {
    pub fn name(self) -> &'static str {
        match self {
            Gate::Id => "id",
            Gate::X => "x",
            Gate::Y => "y",
            Gate::Z => "z",
            Gate::H => "h",
            Gate::S => "s",
            Gate::Sdg => "sdg",
            Gate::T => "t",
            Gate::Tdg => "tdg",
            Gate::Rx => "rx",
            Gate::Ry => "ry",
            Gate::Rz => "rz",
            Gate::Cx => "cx",
            Gate::Cz => "cz",
            Gate::Swap => "swap",
            Gate::Barrier => "barrier",
            Gate::Measure => "measure",
            Gate::Prx => "prx",
            Gate::Rxx => "rxx",
        }
    }

    pub fn all() -> &'static [Gate] {
        ALL_GATES
    }

    pub fn is_generic(self) -> bool {
        GENERIC_GATES.contains(&self)
    }

    /// Number of real parameters the gate takes.
    pub fn num_params(self) -> usize {
        match self {
            Gate::Rx | Gate::Ry | Gate::Rz | Gate::Rxx => 1,
            Gate::Prx => 2,
            _ => 0,
        }
    }

    /// Number of qubits, or `None` for the variadic barrier.
    pub fn num_qubits(self) -> Option<usize> {
        match self {
            Gate::Barrier => None,
            Gate::Cx | Gate::Cz | Gate::Swap | Gate::Rxx => Some(2),
            _ => Some(1),
        }
    }

    /// True for gates that act unitarily (everything except barrier and measure).
    pub fn is_unitary(self) -> bool {
        !matches!(self, Gate::Barrier | Gate::Measure)
    }

    /// Symmetric two-qubit gates whose qubit order does not matter.
    pub fn is_symmetric(self) -> bool {
        matches!(self, Gate::Cz | Gate::Swap | Gate::Rxx)
    }

    /// Gates diagonal in the computational basis.
    pub fn is_diagonal(self) -> bool {
        matches!(
            self,
            Gate::Id | Gate::Z | Gate::S | Gate::Sdg | Gate::T | Gate::Tdg | Gate::Rz | Gate::Cz
        )
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Gate::Rx | Gate::Ry | Gate::Rz | Gate::Rxx)
    }

    /// Row-major matrix of the gate; local index bit `j` is the op's `j`-th qubit.
    pub fn matrix(self, params: &[f64]) -> Option<Vec<Complex64>> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let zero = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let m = match self {
            Gate::Barrier | Gate::Measure => return None,
            Gate::Id => vec![one, zero, zero, one],
            Gate::X => vec![zero, one, one, zero],
            Gate::Y => vec![zero, c(0.0, -1.0), c(0.0, 1.0), zero],
            Gate::Z => vec![one, zero, zero, -one],
            Gate::H => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                vec![h, h, h, -h]
            }
            Gate::S => vec![one, zero, zero, c(0.0, 1.0)],
            Gate::Sdg => vec![one, zero, zero, c(0.0, -1.0)],
            Gate::T => vec![one, zero, zero, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
            Gate::Tdg => vec![one, zero, zero, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)],
            Gate::Rx => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
            }
            Gate::Ry => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
            }
            Gate::Rz => {
                let half = params[0] / 2.0;
                vec![
                    Complex64::from_polar(1.0, -half),
                    zero,
                    zero,
                    Complex64::from_polar(1.0, half),
                ]
            }
            // prx(θ, φ) = rz(φ)·rx(θ)·rz(−φ)
            Gate::Prx => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                let phi = params[1];
                vec![
                    c(co, 0.0),
                    c(0.0, -s) * Complex64::from_polar(1.0, -phi),
                    c(0.0, -s) * Complex64::from_polar(1.0, phi),
                    c(co, 0.0),
                ]
            }
            Gate::Cx => {
                // control = local bit 0, target = local bit 1: swaps |01> (idx 1) and |11> (idx 3)
                let mut m = vec![zero; 16];
                m[0] = one;
                m[3 * 4 + 1] = one;
                m[2 * 4 + 2] = one;
                m[4 + 3] = one;
                m
            }
            Gate::Cz => {
                let mut m = vec![zero; 16];
                m[0] = one;
                m[5] = one;
                m[10] = one;
                m[15] = -one;
                m
            }
            Gate::Swap => {
                let mut m = vec![zero; 16];
                m[0] = one;
                m[4 + 2] = one;
                m[2 * 4 + 1] = one;
                m[15] = one;
                m
            }
            // rxx(θ) = exp(−iθ/2 · X⊗X)
            Gate::Rxx => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                let d = c(co, 0.0);
                let o = c(0.0, -s);
                let mut m = vec![zero; 16];
                for i in 0..4 {
                    m[i * 4 + i] = d;
                    m[i * 4 + (3 - i)] = o;
                }
                m
            }
        };
        Some(m)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownGate(pub String);

impl fmt::Display for UnknownGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown gate `{}`", self.0)
    }
}

impl std::error::Error for UnknownGate {}

impl FromStr for Gate {
    type Err = UnknownGate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ALL_GATES
            .iter()
            .copied()
            .find(|g| g.name() == s)
            .ok_or_else(|| UnknownGate(s.to_string()))
    }
}
