use num_complex::Complex64;
use rand::Rng;

use crate::circuit::Gate;

/// Dense statevector; qubit 0 is the least-significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// |0…0⟩ on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Statevector { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies a unitary gate; barrier and measure are no-ops here.
    pub fn apply(&mut self, gate: Gate, params: &[f64], qubits: &[usize]) {
        let Some(m) = gate.matrix(params) else { return };
        match qubits {
            [q] => self.apply_1q(*q, &m),
            [a, b] => self.apply_2q(*a, *b, &m),
            _ => unreachable!("gates act on one or two qubits"),
        }
    }

    fn apply_1q(&mut self, q: usize, m: &[Complex64]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit != 0 {
                continue;
            }
            let j = i | bit;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0] * a0 + m[1] * a1;
            self.amps[j] = m[2] * a0 + m[3] * a1;
        }
    }

    fn apply_2q(&mut self, q0: usize, q1: usize, m: &[Complex64]) {
        let (b0, b1) = (1usize << q0, 1usize << q1);
        for i in 0..self.amps.len() {
            if i & (b0 | b1) != 0 {
                continue;
            }
            let idx = [i, i | b0, i | b1, i | b0 | b1];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| m[r * 4 + c] * v[c]).sum();
            }
        }
    }

    /// Draws `shots` basis indices by inverting the cumulative distribution.
    pub fn sample<R: Rng>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let last = cdf.len() - 1;
        (0..shots)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_amplitudes() {
        let mut sv = Statevector::zero(2);
        sv.apply(Gate::H, &[], &[0]);
        sv.apply(Gate::Cx, &[], &[0, 1]);
        let p = sv.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[3] - 0.5).abs() < 1e-15);
        assert!(p[1] < 1e-30 && p[2] < 1e-30);
    }

    #[test]
    fn sampling_never_picks_zero_probability_states() {
        let mut sv = Statevector::zero(3);
        sv.apply(Gate::X, &[], &[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sv.sample(1000, &mut rng).iter().all(|&i| i == 2));
    }
}
