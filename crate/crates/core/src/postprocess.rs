//! Histograms and tensored readout-error mitigation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::qdmi::{Confusion, Counts};

pub const MAX_MITIGATED_BITS: usize = 16;

pub type Histogram = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostprocessError {
    #[error("empty counts")]
    EmptyCounts,
    #[error("confusion matrix of clbit {0} is singular")]
    SingularConfusion(usize),
    #[error("mitigation is limited to {MAX_MITIGATED_BITS} measured bits, got {0}")]
    TooManyBits(usize),
}

/// Relative frequencies.
pub fn histogram(counts: &Counts) -> Result<Histogram, PostprocessError> {
    if counts.shots_total == 0 || counts.counts.is_empty() {
        return Err(PostprocessError::EmptyCounts);
    }
    let total = counts.shots_total as f64;
    Ok(counts.counts.iter().map(|(k, &v)| (k.clone(), v as f64 / total)).collect())
}

/// Applies the inverse of each clbit's confusion matrix to the measured
/// distribution, clips negative entries and renormalises.
///
/// `per_clbit` maps a clbit index to the confusion of the qubit read into it;
/// clbits without an entry are taken as read perfectly.
pub fn mitigate_readout(counts: &Counts, per_clbit: &BTreeMap<usize, Confusion>) -> Result<Histogram, PostprocessError> {
    let measured = histogram(counts)?;
    let width = measured.keys().next().map(|k| k.len()).unwrap_or(0);
    if width > MAX_MITIGATED_BITS {
        return Err(PostprocessError::TooManyBits(width));
    }
    let mut inverses = Vec::with_capacity(width);
    for bit in 0..width {
        let c = per_clbit.get(&bit).copied().unwrap_or(Confusion::PERFECT);
        let det = c.p0_given_0 + c.p1_given_1 - 1.0;
        if det.abs() < 1e-12 {
            return Err(PostprocessError::SingularConfusion(bit));
        }
        // column = true outcome, row = observed outcome
        let m = [c.p0_given_0, 1.0 - c.p1_given_1, 1.0 - c.p0_given_0, c.p1_given_1];
        inverses.push([m[3] / det, -m[1] / det, -m[2] / det, m[0] / det]);
    }

    let mut p = vec![0.0; 1 << width];
    for (key, f) in &measured {
        p[usize::from_str_radix(key, 2).expect("bitstring key")] = *f;
    }
    for (bit, inv) in inverses.iter().enumerate() {
        let mask = 1 << bit;
        for i in (0..p.len()).filter(|i| i & mask == 0) {
            let (a, b) = (p[i], p[i | mask]);
            p[i] = inv[0] * a + inv[1] * b;
            p[i | mask] = inv[2] * a + inv[3] * b;
        }
    }
    for v in &mut p {
        *v = v.max(0.0);
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Ok(measured);
    }
    Ok(p.iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (format!("{i:0width$b}"), v / total))
        .collect())
}
