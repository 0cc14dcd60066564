//! Per-job pipeline from generic source to result envelope: device
//! selection, compilation, dispatch and post-processing.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{parse_circuit, QuantumCircuit};
use crate::compiler::{compile, CompileStats, PassPipeline, SelectorRegistry, DEFAULT_SELECTOR};
use crate::fomac::{report, FomacLimits, FomacReport};
use crate::postprocess::{histogram, mitigate_readout, Histogram};
use crate::qdmi::{Counts, DeviceProperties, JobId, JobRecord, JobSpec, JobState, Qdmi, QdmiError, SessionId};
use crate::scheduler::{build_candidates, select_device, SchedulerError, SchedulingPolicy};

pub const MAX_PRIORITY: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Origin {
    Local,
    Remote,
}

impl Origin {
    /// Local submissions gain one priority level, capped at the maximum.
    pub fn boost(self, priority: u8) -> u8 {
        match self {
            Origin::Local => (priority + 1).min(MAX_PRIORITY),
            Origin::Remote => priority,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRequest {
    pub circuit: String,
    pub shots: u64,
    #[serde(default)]
    pub priority: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<SchedulingPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default)]
    pub mitigate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SubmissionRequest {
    pub fn new(circuit: impl Into<String>, shots: u64) -> Self {
        SubmissionRequest { circuit: circuit.into(), shots, priority: 0, policy: None, device: None, mitigate: false, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("no healthy device")]
    NoHealthyDevice,
    #[error(transparent)]
    Qdmi(#[from] QdmiError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStamp {
    pub taken_at: f64,
    pub calibrated_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyWeights {
    pub w_esp: f64,
    pub w_wait: f64,
    pub w_exec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeMetadata {
    pub device_id: String,
    pub calibration: Option<CalibrationStamp>,
    pub compile_stats: Option<CompileStats>,
    pub pipeline: Option<PassPipeline>,
    pub policy_weights: Option<PolicyWeights>,
    pub origin: Option<Origin>,
    pub shots: u64,
    pub seed: u64,
    pub started_at: Option<f64>,
    pub finished_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitigation_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub job_id: JobId,
    pub counts: Counts,
    pub histogram: Histogram,
    pub mitigated_histogram: Option<Histogram>,
    pub metadata: EnvelopeMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub properties: DeviceProperties,
    pub fomac: FomacReport,
    pub queue_length: usize,
    pub est_wait_s: f64,
    pub busy: bool,
}

#[derive(Debug, Clone)]
pub struct OrchestratorConfig {
    pub limits: FomacLimits,
    pub default_policy: SchedulingPolicy,
    pub pass_selector: String,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            limits: FomacLimits::default(),
            default_policy: SchedulingPolicy::default(),
            pass_selector: DEFAULT_SELECTOR.to_string(),
        }
    }
}

/// What the pipeline learned about a job before it reached the device.
#[derive(Debug, Clone, Default)]
struct JobMeta {
    origin: Option<Origin>,
    mitigate: bool,
    weights: Option<PolicyWeights>,
    calibration: Option<CalibrationStamp>,
    compile_stats: Option<CompileStats>,
    pipeline: Option<PassPipeline>,
    /// Readout confusion per clbit, captured at compile time.
    confusion: BTreeMap<usize, crate::qdmi::Confusion>,
}

struct Shared {
    qdmi: Qdmi,
    config: OrchestratorConfig,
    registry: SelectorRegistry,
    meta: Mutex<HashMap<JobId, JobMeta>>,
    envelopes: Mutex<HashMap<JobId, ResultEnvelope>>,
}

#[derive(Clone)]
pub struct Orchestrator {
    shared: Arc<Shared>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Orchestrator {
    pub fn new(qdmi: Qdmi, config: OrchestratorConfig, registry: SelectorRegistry) -> Self {
        Orchestrator {
            shared: Arc::new(Shared {
                qdmi,
                config,
                registry,
                meta: Mutex::new(HashMap::new()),
                envelopes: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn qdmi(&self) -> &Qdmi {
        &self.shared.qdmi
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.shared.config
    }

    pub fn registry(&self) -> &SelectorRegistry {
        &self.shared.registry
    }

    /// Accepts a submission and returns once the job is `RECEIVED`; the rest
    /// of the pipeline runs on its own thread.
    pub fn submit(&self, session: &SessionId, request: &SubmissionRequest, origin: Origin) -> Result<JobId, OrchestratorError> {
        let (circuit, spec, policy) = self.accept(session, request, origin)?;
        let job_id = self.shared.qdmi.job_receive(session, spec)?;
        lock(&self.shared.meta).insert(
            job_id.clone(),
            JobMeta {
                origin: Some(origin),
                mitigate: request.mitigate,
                weights: Some(PolicyWeights { w_esp: policy.w_esp, w_wait: policy.w_wait, w_exec: policy.w_exec }),
                ..Default::default()
            },
        );
        let this = self.clone();
        let id = job_id.clone();
        let device = request.device.clone();
        thread::spawn(move || {
            let outcome = catch_unwind(AssertUnwindSafe(|| this.drive(&id, &circuit, device.as_deref(), &policy)));
            let message = match outcome {
                Ok(Ok(())) => return,
                Ok(Err(m)) => m,
                Err(_) => "orchestration panicked".to_string(),
            };
            // fails only if the job was cancelled meanwhile
            let _ = this.shared.qdmi.job_fail(&id, message);
        });
        Ok(job_id)
    }

    /// Synchronous checks done before a job exists.
    fn accept(
        &self,
        session: &SessionId,
        request: &SubmissionRequest,
        origin: Origin,
    ) -> Result<(QuantumCircuit, JobSpec, SchedulingPolicy), OrchestratorError> {
        let qdmi = &self.shared.qdmi;
        qdmi.check_session(session)?;
        let circuit = parse_circuit(&request.circuit).map_err(|e| OrchestratorError::Parse(e.to_string()))?;
        if request.priority > MAX_PRIORITY {
            return Err(OrchestratorError::Invalid(format!("priority {} outside 0..=9", request.priority)));
        }
        if request.shots == 0 || request.shots > qdmi.config().max_shots {
            return Err(OrchestratorError::Invalid(format!("shots must be in 1..={}", qdmi.config().max_shots)));
        }
        if let Some(d) = &request.device {
            qdmi.device_properties(d).map_err(|_| OrchestratorError::Invalid(format!("unknown device `{d}`")))?;
        }
        let policy = request.policy.clone().unwrap_or_else(|| self.shared.config.default_policy.clone());
        policy.validate().map_err(|e| OrchestratorError::Invalid(e.to_string()))?;
        if request.device.is_none()
            && !build_candidates(qdmi, &circuit, request.shots, &self.shared.config.limits)
                .iter()
                .any(|c| c.healthy && policy.allows(&c.device_id))
        {
            return Err(OrchestratorError::NoHealthyDevice);
        }
        let spec = JobSpec { shots: request.shots, priority: origin.boost(request.priority), seed: request.seed };
        Ok((circuit, spec, policy))
    }

    fn drive(&self, job_id: &JobId, circuit: &QuantumCircuit, device: Option<&str>, policy: &SchedulingPolicy) -> Result<(), String> {
        let qdmi = &self.shared.qdmi;
        let shots = qdmi.job_record(job_id).map_err(|e| e.to_string())?.shots;
        let device_id = match device {
            Some(d) => d.to_string(),
            None => match select_device(qdmi, circuit, shots, policy, &self.shared.config.limits) {
                Ok((d, _)) => d,
                Err(SchedulerError::NoHealthyDevice) => return Err("no healthy device".into()),
                Err(e) => return Err(e.to_string()),
            },
        };
        if qdmi.job_schedule(job_id, &device_id).is_err() {
            return Ok(()); // cancelled while selecting
        }
        let props = qdmi.device_properties(&device_id).map_err(|e| e.to_string())?;
        let snapshot = qdmi.telemetry(&device_id).map_err(|e| e.to_string())?;
        let compiled = compile(circuit, &props, &snapshot, &self.shared.config.pass_selector, &self.shared.registry)
            .map_err(|e| format!("compile error: {e}"))?;
        let confusion = compiled
            .circuit
            .measurements()
            .into_iter()
            .filter_map(|(clbit, qubit)| snapshot.confusion.get(&qubit).map(|c| (clbit, *c)))
            .collect();
        if let Some(m) = lock(&self.shared.meta).get_mut(job_id) {
            m.calibration = Some(CalibrationStamp { taken_at: snapshot.taken_at, calibrated_at: snapshot.calibrated_at });
            m.compile_stats = Some(compiled.stats);
            m.pipeline = Some(compiled.pipeline);
            m.confusion = confusion;
        }
        if qdmi.job_compiled(job_id, compiled.program).is_err() {
            return Ok(());
        }
        match qdmi.job_dispatch(job_id) {
            Ok(()) => Ok(()),
            Err(QdmiError::AlreadyTerminal(_)) | Err(QdmiError::IllegalTransition { .. }) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    }

    pub fn job(&self, job_id: &JobId) -> Result<JobRecord, QdmiError> {
        self.shared.qdmi.job_record(job_id)
    }

    pub fn cancel(&self, job_id: &JobId) -> Result<(), QdmiError> {
        self.shared.qdmi.job_cancel(job_id)
    }

    /// The result envelope of a `DONE` job; built once and then served from cache.
    pub fn result(&self, job_id: &JobId) -> Result<ResultEnvelope, QdmiError> {
        if let Some(e) = lock(&self.shared.envelopes).get(job_id) {
            return Ok(e.clone());
        }
        let rec = self.shared.qdmi.job_record(job_id)?;
        let counts = match (rec.state, &rec.result) {
            (JobState::Done, Some(c)) => c.clone(),
            (state, _) => return Err(QdmiError::NotDone(state)),
        };
        let meta = lock(&self.shared.meta).get(job_id).cloned().unwrap_or_default();
        let hist = histogram(&counts).map_err(|e| QdmiError::Validation(e.to_string()))?;
        let (mitigated, mitigation_error) = if meta.mitigate {
            match mitigate_readout(&counts, &meta.confusion) {
                Ok(h) => (Some(h), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (None, None)
        };
        let envelope = ResultEnvelope {
            job_id: job_id.clone(),
            counts,
            histogram: hist,
            mitigated_histogram: mitigated,
            metadata: EnvelopeMetadata {
                device_id: rec.device_id.clone().unwrap_or_default(),
                calibration: meta.calibration,
                compile_stats: meta.compile_stats,
                pipeline: meta.pipeline,
                policy_weights: meta.weights,
                origin: meta.origin,
                shots: rec.shots,
                seed: rec.seed,
                started_at: rec.entered_at(JobState::Running),
                finished_at: rec.entered_at(JobState::Done),
                mitigation_error,
            },
        };
        Ok(lock(&self.shared.envelopes).entry(job_id.clone()).or_insert(envelope).clone())
    }

    /// Seeds the envelope cache, e.g. with envelopes read back from a log.
    pub fn restore_envelope(&self, envelope: ResultEnvelope) {
        lock(&self.shared.envelopes).insert(envelope.job_id.clone(), envelope);
    }

    /// Polls until the job is terminal or `timeout` passes; returns the last state seen.
    pub fn wait(&self, job_id: &JobId, timeout: Duration) -> Result<JobState, QdmiError> {
        let deadline = Instant::now() + timeout;
        loop {
            let state = self.shared.qdmi.job_status(job_id)?;
            if state.is_terminal() || Instant::now() >= deadline {
                return Ok(state);
            }
            thread::sleep(Duration::from_millis(2));
        }
    }

    pub fn device_summary(&self, device_id: &str) -> Result<DeviceSummary, QdmiError> {
        let qdmi = &self.shared.qdmi;
        let properties = qdmi.device_properties(device_id)?;
        let snapshot = qdmi.telemetry(device_id)?;
        Ok(DeviceSummary {
            fomac: report(&snapshot, properties.num_qubits, &self.shared.config.limits, qdmi.now()),
            queue_length: qdmi.queue_len(device_id)?,
            est_wait_s: qdmi.estimate_wait(device_id)?,
            busy: qdmi.is_busy(device_id)?,
            properties,
        })
    }

    pub fn devices(&self) -> Vec<DeviceSummary> {
        self.shared.qdmi.device_list().iter().filter_map(|d| self.device_summary(d).ok()).collect()
    }
}

#[cfg(test)]
mod tests;
