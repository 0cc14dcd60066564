//! Upper scheduling level: device choice by Pareto filtering and a weighted
//! scalarization over the front.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("no healthy device available")]
    NoHealthyDevice,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCandidate {
    pub device_id: String,
    pub est_wait_s: f64,
    pub esp: f64,
    pub est_exec_s: f64,
    pub healthy: bool,
}

impl DeviceCandidate {
    /// Minimization criteria `(wait, 1 − esp, exec)`.
    pub fn criteria(&self) -> [f64; 3] {
        [self.est_wait_s, 1.0 - self.esp, self.est_exec_s]
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.est_wait_s) && ok(self.est_exec_s) && (0.0..=1.0).contains(&self.esp)) {
            return Err(SchedulerError::InvalidCandidate(self.device_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulingPolicy {
    pub w_esp: f64,
    pub w_wait: f64,
    pub w_exec: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_list: Option<BTreeSet<String>>,
}

impl Default for SchedulingPolicy {
    fn default() -> Self {
        SchedulingPolicy { w_esp: 0.5, w_wait: 0.3, w_exec: 0.2, allow_list: None }
    }
}

impl SchedulingPolicy {
    pub fn weights(w_esp: f64, w_wait: f64, w_exec: f64) -> Result<Self, SchedulerError> {
        let p = SchedulingPolicy { w_esp, w_wait, w_exec, allow_list: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        let w = [self.w_esp, self.w_wait, self.w_exec];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SchedulerError::InvalidPolicy("weights must be non-negative".into()));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SchedulerError::InvalidPolicy(format!("weights sum to {}, not 1", w.iter().sum::<f64>())));
        }
        Ok(())
    }

    pub fn allows(&self, device_id: &str) -> bool {
        self.allow_list.as_ref().is_none_or(|l| l.contains(device_id))
    }
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &DeviceCandidate, b: &DeviceCandidate) -> bool {
    let (x, y) = (a.criteria(), b.criteria());
    x.iter().zip(&y).all(|(p, q)| p <= q) && x.iter().zip(&y).any(|(p, q)| p < q)
}

/// Non-dominated healthy candidates, in input order.
pub fn pareto_front(candidates: &[DeviceCandidate]) -> Result<Vec<DeviceCandidate>, SchedulerError> {
    let healthy: Vec<&DeviceCandidate> = candidates.iter().filter(|c| c.healthy).collect();
    if healthy.is_empty() {
        return Err(SchedulerError::NoHealthyDevice);
    }
    Ok(healthy
        .iter()
        .filter(|c| !healthy.iter().any(|o| dominates(o, c)))
        .map(|c| (*c).clone())
        .collect())
}

/// Weighted sum of min-max normalized criteria for each front member.
pub fn scalarize(front: &[DeviceCandidate], policy: &SchedulingPolicy) -> Vec<f64> {
    let crit: Vec<[f64; 3]> = front.iter().map(DeviceCandidate::criteria).collect();
    let mut norm = vec![[0.0; 3]; front.len()];
    for k in 0..3 {
        let lo = crit.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
        let hi = crit.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            for (n, c) in norm.iter_mut().zip(&crit) {
                n[k] = (c[k] - lo) / (hi - lo);
            }
        }
    }
    norm.iter().map(|n| policy.w_wait * n[0] + policy.w_esp * n[1] + policy.w_exec * n[2]).collect()
}

const SCORE_TIE: f64 = 1e-12;

/// Picks the front member with the lowest score; near-equal scores go to the
/// lexicographically smallest device id.
pub fn select_from_candidates(candidates: &[DeviceCandidate], policy: &SchedulingPolicy) -> Result<String, SchedulerError> {
    policy.validate()?;
    for c in candidates {
        c.validate()?;
    }
    let allowed: Vec<DeviceCandidate> = candidates.iter().filter(|c| policy.allows(&c.device_id)).cloned().collect();
    let front = pareto_front(&allowed)?;
    let scores = scalarize(&front, policy);
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(front
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s <= best + SCORE_TIE)
        .map(|(c, _)| c.device_id.clone())
        .min()
        .expect("front is non-empty"))
}
