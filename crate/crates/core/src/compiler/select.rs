//! Pass library and the pass-selection hook.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CompileError;
use crate::circuit::QuantumCircuit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PassStage {
    Agnostic,
    Specific,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pass {
    #[serde(rename = "cancel")]
    Cancel,
    #[serde(rename = "commute_reorder")]
    CommuteReorder,
    #[serde(rename = "fuse_1q")]
    Fuse1q,
    #[serde(rename = "basis_translate")]
    BasisTranslate,
    #[serde(rename = "place")]
    Place,
    #[serde(rename = "route")]
    Route,
}

pub const SPECIFIC_TRIO: [Pass; 3] = [Pass::BasisTranslate, Pass::Place, Pass::Route];

impl Pass {
    pub const ALL: [Pass; 6] = [Pass::Cancel, Pass::CommuteReorder, Pass::Fuse1q, Pass::BasisTranslate, Pass::Place, Pass::Route];

    pub fn name(self) -> &'static str {
        match self {
            Pass::Cancel => "cancel",
            Pass::CommuteReorder => "commute_reorder",
            Pass::Fuse1q => "fuse_1q",
            Pass::BasisTranslate => "basis_translate",
            Pass::Place => "place",
            Pass::Route => "route",
        }
    }

    pub fn from_name(name: &str) -> Option<Pass> {
        Pass::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn stage(self) -> PassStage {
        if SPECIFIC_TRIO.contains(&self) {
            PassStage::Specific
        } else {
            PassStage::Agnostic
        }
    }

    pub fn descriptor(self) -> PassDescriptor {
        PassDescriptor { name: self.name().to_string(), stage: self.stage() }
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassDescriptor {
    pub name: String,
    pub stage: PassStage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub selector: String,
    /// sha256 over the circuit digest and device id.
    pub inputs_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassPipeline {
    pub passes: Vec<Pass>,
    pub provenance: Provenance,
}

impl PassPipeline {
    pub fn descriptors(&self) -> Vec<PassDescriptor> {
        self.passes.iter().map(|p| p.descriptor()).collect()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.passes.iter().map(|p| p.name()).collect()
    }
}

/// A pass-selection policy: given a circuit digest and a device id, returns
/// pass names in the order to run them.
pub trait PassSelector: Send + Sync {
    fn select(&self, circuit_digest: &str, device_id: &str) -> Vec<String>;
}

impl<F> PassSelector for F
where
    F: Fn(&str, &str) -> Vec<String> + Send + Sync,
{
    fn select(&self, circuit_digest: &str, device_id: &str) -> Vec<String> {
        self(circuit_digest, device_id)
    }
}

/// Hex sha256 of the circuit's source rendering.
pub fn circuit_digest(circuit: &QuantumCircuit) -> String {
    hex::encode(Sha256::digest(circuit.to_source().as_bytes()))
}

pub const DEFAULT_SELECTOR: &str = "default";

/// Named pass selectors. `default` and `none` are always present.
#[derive(Clone)]
pub struct SelectorRegistry {
    selectors: Arc<RwLock<BTreeMap<String, Arc<dyn PassSelector>>>>,
}

impl Default for SelectorRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for SelectorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.names()).finish()
    }
}

fn names(passes: &[Pass]) -> Vec<String> {
    passes.iter().map(|p| p.name().to_string()).collect()
}

impl SelectorRegistry {
    pub fn new() -> Self {
        let reg = SelectorRegistry { selectors: Arc::default() };
        reg.register(DEFAULT_SELECTOR, |_: &str, _: &str| {
            names(&[
                Pass::Cancel,
                Pass::CommuteReorder,
                Pass::Cancel,
                Pass::Fuse1q,
                Pass::BasisTranslate,
                Pass::Place,
                Pass::Route,
            ])
        });
        reg.register("none", |_: &str, _: &str| names(&SPECIFIC_TRIO));
        reg
    }

    pub fn register(&self, name: &str, selector: impl PassSelector + 'static) {
        self.selectors.write().unwrap_or_else(|e| e.into_inner()).insert(name.to_string(), Arc::new(selector));
    }

    pub fn names(&self) -> Vec<String> {
        self.selectors.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    /// Runs the named selector. Device-specific names it returns are dropped
    /// and the translate/place/route trio is appended in that order.
    pub fn select_passes(&self, circuit: &QuantumCircuit, device_id: &str, policy: &str) -> Result<PassPipeline, CompileError> {
        let selector = self
            .selectors
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(policy)
            .cloned()
            .ok_or_else(|| CompileError::UnknownPolicy(policy.to_string()))?;
        let digest = circuit_digest(circuit);
        let mut passes = Vec::new();
        for name in selector.select(&digest, device_id) {
            let pass = Pass::from_name(&name).ok_or(CompileError::UnknownPass(name))?;
            if pass.stage() == PassStage::Agnostic {
                passes.push(pass);
            }
        }
        passes.extend(SPECIFIC_TRIO);
        let inputs_hash = hex::encode(Sha256::digest(format!("{digest}\n{device_id}").as_bytes()));
        Ok(PassPipeline { passes, provenance: Provenance { selector: policy.to_string(), inputs_hash } })
    }
}
