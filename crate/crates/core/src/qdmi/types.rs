use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::Gate;

macro_rules! id_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(SessionId);
id_newtype!(JobId);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: SessionId,
    pub owner: String,
    pub created_at: f64,
    pub open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum JobState {
    Received,
    Scheduled,
    Compiled,
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }

    /// The allowed transition graph.
    pub fn can_transition(self, to: JobState) -> bool {
        use JobState::*;
        if self.is_terminal() {
            return false;
        }
        matches!(
            (self, to),
            (Received, Scheduled)
                | (Scheduled, Compiled)
                | (Compiled, Queued)
                | (Queued, Running)
                | (Running, Done)
                | (Running, Failed)
                | (_, Cancelled)
        ) || (to == Failed && self != Queued)
    }

    /// States a job may be created in.
    pub fn is_initial(self) -> bool {
        matches!(self, JobState::Received | JobState::Queued)
    }

    pub fn name(self) -> &'static str {
        match self {
            JobState::Received => "RECEIVED",
            JobState::Scheduled => "SCHEDULED",
            JobState::Compiled => "COMPILED",
            JobState::Queued => "QUEUED",
            JobState::Running => "RUNNING",
            JobState::Done => "DONE",
            JobState::Failed => "FAILED",
            JobState::Cancelled => "CANCELLED",
        }
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measurement histogram keyed by fixed-width bitstrings.
///
/// Key characters run from the highest measured clbit (left) to the lowest
/// (right).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub counts: BTreeMap<String, u64>,
    pub shots_total: u64,
}

impl Counts {
    pub fn from_map(counts: BTreeMap<String, u64>) -> Self {
        let shots_total = counts.values().sum();
        Counts { counts, shots_total }
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn is_consistent(&self) -> bool {
        let width = self.counts.keys().next().map(|k| k.len());
        self.counts.values().sum::<u64>() == self.shots_total
            && self
                .counts
                .keys()
                .all(|k| Some(k.len()) == width && k.bytes().all(|b| b == b'0' || b == b'1'))
    }
}

/// Static device capabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProperties {
    pub device_id: String,
    pub display_name: String,
    pub num_qubits: usize,
    pub native_gates: BTreeSet<Gate>,
    /// Undirected pairs stored as `(low, high)`.
    pub coupling_map: Vec<(usize, usize)>,
    /// Seconds per gate.
    pub gate_durations: BTreeMap<Gate, f64>,
    pub shot_overhead: f64,
    pub setup_overhead: f64,
}

impl DeviceProperties {
    pub fn validate(&self) -> Result<(), String> {
        if self.device_id.is_empty() {
            return Err("empty device id".into());
        }
        for &(a, b) in &self.coupling_map {
            if a >= self.num_qubits || b >= self.num_qubits {
                return Err(format!("coupling pair ({a},{b}) references a qubit outside 0..{}", self.num_qubits));
            }
            if a == b {
                return Err(format!("self-loop on qubit {a}"));
            }
        }
        for g in &self.native_gates {
            if g.num_qubits() == Some(2) && !self.gate_durations.contains_key(g) {
                return Err(format!("two-qubit native gate `{g}` has no duration"));
            }
        }
        if self.gate_durations.values().chain([&self.shot_overhead, &self.setup_overhead]).any(|d| !d.is_finite() || *d < 0.0) {
            return Err("durations must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn is_coupled(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        self.coupling_map.contains(&key)
    }

    /// Adjacency lists over physical qubits.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_qubits];
        for &(a, b) in &self.coupling_map {
            adj[a].push(b);
            adj[b].push(a);
        }
        for n in &mut adj {
            n.sort_unstable();
            n.dedup();
        }
        adj
    }

    /// The native two-qubit entangling gate, if any.
    pub fn two_qubit_gate(&self) -> Option<Gate> {
        self.native_gates.iter().copied().find(|g| g.num_qubits() == Some(2))
    }

    pub fn duration(&self, gate: Gate) -> f64 {
        self.gate_durations.get(&gate).copied().unwrap_or(0.0)
    }
}

/// `(gate, qubits)` key of a gate-fidelity entry, rendered as `cz:3-4`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateKey {
    pub gate: Gate,
    pub qubits: Vec<usize>,
}

impl GateKey {
    /// Symmetric gates are keyed by their sorted qubits.
    pub fn new(gate: Gate, qubits: &[usize]) -> Self {
        let mut qubits = qubits.to_vec();
        if gate.is_symmetric() {
            qubits.sort_unstable();
        }
        GateKey { gate, qubits }
    }
}

impl fmt::Display for GateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        write!(f, "{}:{}", self.gate, qs.join("-"))
    }
}

impl FromStr for GateKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (g, qs) = s.split_once(':').ok_or_else(|| format!("malformed gate key `{s}`"))?;
        let gate: Gate = g.parse().map_err(|e: crate::circuit::UnknownGate| e.to_string())?;
        let qubits = qs
            .split('-')
            .map(|q| q.parse::<usize>().map_err(|_| format!("malformed gate key `{s}`")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GateKey { gate, qubits })
    }
}

impl Serialize for GateKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GateKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-qubit readout confusion probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub p0_given_0: f64,
    pub p1_given_1: f64,
}

impl Confusion {
    pub const PERFECT: Confusion = Confusion { p0_given_0: 1.0, p1_given_1: 1.0 };
}

/// Time-stamped dynamic calibration data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySnapshot {
    pub device_id: String,
    pub taken_at: f64,
    pub gate_fidelity: BTreeMap<GateKey, f64>,
    pub t1: BTreeMap<usize, f64>,
    pub t2: BTreeMap<usize, f64>,
    pub readout_fidelity: BTreeMap<usize, f64>,
    pub confusion: BTreeMap<usize, Confusion>,
    #[serde(rename = "temperature_mK")]
    pub temperature_mk: f64,
    pub calibrated_at: f64,
}

impl TelemetrySnapshot {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !self.gate_fidelity.values().chain(self.readout_fidelity.values()).all(|&v| unit(v)) {
            return Err("fidelity outside [0,1]".into());
        }
        if !self.confusion.values().all(|c| unit(c.p0_given_0) && unit(c.p1_given_1)) {
            return Err("confusion probability outside [0,1]".into());
        }
        for (q, t2) in &self.t2 {
            if let Some(t1) = self.t1.get(q) {
                if *t2 > 2.0 * t1 {
                    return Err(format!("t2 > 2·t1 on qubit {q}"));
                }
            }
        }
        if self.taken_at < self.calibrated_at {
            return Err("snapshot older than its calibration".into());
        }
        Ok(())
    }

    pub fn fidelity(&self, gate: Gate, qubits: &[usize]) -> Option<f64> {
        self.gate_fidelity.get(&GateKey::new(gate, qubits)).copied()
    }
}
