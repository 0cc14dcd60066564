//! Device management interface: sessions, job queue management, property
//! queries and plugin registration.

mod ids;
mod plugin;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock, Weak};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::circuit::{parse_lowlevel, Gate, Level, QuantumCircuit};
use crate::clock::Clock;
use crate::scheduler::{estimate_execution_time, CircuitStats, DeviceQueue, QueueError, Reservation};

pub use ids::{new_session_token, IdGenerator};
pub use plugin::{CancelToken, DevicePlugin, ExecutionError};
pub use types::{
    Confusion, Counts, DeviceProperties, GateKey, JobId, JobState, Session, SessionId, TelemetrySnapshot,
};

pub const STATIC_KEYS: &[&str] =
    &["num_qubits", "native_gates", "coupling_map", "gate_durations", "shot_overhead", "setup_overhead"];
pub const DYNAMIC_KEYS: &[&str] =
    &["gate_fidelity", "t1", "t2", "readout_fidelity", "confusion", "temperature_mK", "calibrated_at"];

const WORKER_POLL: Duration = Duration::from_millis(25);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QdmiError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("session already closed")]
    AlreadyClosed,
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("unknown job `{0}`")]
    UnknownJob(JobId),
    #[error("job is {0}, not DONE")]
    NotDone(JobState),
    #[error("job already terminal ({0})")]
    AlreadyTerminal(JobState),
    #[error("invalid device properties: {0}")]
    InvalidProperties(String),
    #[error("device `{0}` already registered")]
    DuplicateDevice(String),
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: JobState, to: JobState },
    #[error(transparent)]
    Queue(#[from] QueueError),
}

#[derive(Debug, Clone)]
pub struct QdmiConfig {
    pub allow_list: BTreeSet<String>,
    pub max_shots: u64,
}

impl Default for QdmiConfig {
    fn default() -> Self {
        QdmiConfig { allow_list: BTreeSet::new(), max_shots: 100_000 }
    }
}

impl QdmiConfig {
    pub fn with_tokens<I: IntoIterator<Item = S>, S: Into<String>>(tokens: I) -> Self {
        QdmiConfig { allow_list: tokens.into_iter().map(Into::into).collect(), ..Default::default() }
    }

    /// Reads an allow-list file: one token per line, blank lines and `#` comments ignored.
    pub fn load_allow_list(path: &Path) -> std::io::Result<BTreeSet<String>> {
        let text = std::fs::read_to_string(path)?;
        Ok(text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateStamp {
    pub state: JobState,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: JobId,
    pub session_id: SessionId,
    pub device_id: Option<String>,
    pub program: Option<String>,
    pub shots: u64,
    pub priority: u8,
    pub seed: u64,
    pub state: JobState,
    pub seq: Option<u64>,
    pub est_exec_s: Option<f64>,
    pub transitions: Vec<StateStamp>,
    pub result: Option<Counts>,
    pub error: Option<String>,
}

impl JobRecord {
    pub fn entered_at(&self, state: JobState) -> Option<f64> {
        self.transitions.iter().find(|s| s.state == state).map(|s| s.at)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub job_id: JobId,
    pub from: Option<JobState>,
    pub to: JobState,
    pub at: f64,
}

/// Parameters of a new job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub shots: u64,
    pub priority: u8,
    pub seed: Option<u64>,
}

type Observer = Arc<dyn Fn(&TransitionEvent, &JobRecord) + Send + Sync>;

struct RunningJob {
    job_id: JobId,
    started_at: f64,
    est_exec_s: f64,
    cancel: CancelToken,
}

struct DeviceSlot {
    properties: DeviceProperties,
    plugin: Arc<dyn DevicePlugin>,
    queue: DeviceQueue,
    running: Mutex<Option<RunningJob>>,
}

struct Inner {
    config: QdmiConfig,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<SessionId, Session>>,
    devices: RwLock<BTreeMap<String, Arc<DeviceSlot>>>,
    jobs: RwLock<HashMap<JobId, Arc<Mutex<JobRecord>>>>,
    job_order: Mutex<Vec<JobId>>,
    log: Mutex<Vec<TransitionEvent>>,
    observers: RwLock<Vec<Observer>>,
    ids: IdGenerator,
    shutdown: AtomicBool,
}

/// Shared, internally synchronized device registry. Cloning yields another
/// handle to the same registry; device workers stop once every handle is
/// dropped or [`Qdmi::shutdown`] is called.
#[derive(Clone)]
pub struct Qdmi {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Inner {
    fn now(&self) -> f64 {
        self.clock.now()
    }

    fn slot(&self, device_id: &str) -> Result<Arc<DeviceSlot>, QdmiError> {
        self.devices
            .read()
            .unwrap()
            .get(device_id)
            .cloned()
            .ok_or_else(|| QdmiError::UnknownDevice(device_id.to_string()))
    }

    fn job(&self, job_id: &JobId) -> Result<Arc<Mutex<JobRecord>>, QdmiError> {
        self.jobs.read().unwrap().get(job_id).cloned().ok_or_else(|| QdmiError::UnknownJob(job_id.clone()))
    }

    fn record_event(&self, event: TransitionEvent, record: &JobRecord) {
        for obs in self.observers.read().unwrap().iter() {
            obs(&event, record);
        }
        lock(&self.log).push(event);
    }

    /// Moves `rec` to `to`; the caller holds the job lock.
    fn transition(&self, rec: &mut JobRecord, to: JobState) -> Result<(), QdmiError> {
        if !rec.state.can_transition(to) {
            return Err(if rec.state.is_terminal() {
                QdmiError::AlreadyTerminal(rec.state)
            } else {
                QdmiError::IllegalTransition { from: rec.state, to }
            });
        }
        let at = self.now();
        let from = rec.state;
        rec.state = to;
        rec.transitions.push(StateStamp { state: to, at });
        let event = TransitionEvent { job_id: rec.job_id.clone(), from: Some(from), to, at };
        self.record_event(event, rec);
        Ok(())
    }

    fn insert_job(&self, rec: JobRecord) {
        let event = TransitionEvent { job_id: rec.job_id.clone(), from: None, to: rec.state, at: rec.transitions[0].at };
        self.record_event(event, &rec);
        lock(&self.job_order).push(rec.job_id.clone());
        self.jobs.write().unwrap().insert(rec.job_id.clone(), Arc::new(Mutex::new(rec)));
    }

    fn check_session(&self, session: &SessionId) -> Result<(), QdmiError> {
        match lock(&self.sessions).get(session) {
            Some(s) if s.open => Ok(()),
            Some(_) => Err(QdmiError::Auth("session closed".into())),
            None => Err(QdmiError::Auth("unknown session".into())),
        }
    }

    fn cancel_locked(&self, rec: &mut JobRecord) -> Result<(), QdmiError> {
        let prev = rec.state;
        self.transition(rec, JobState::Cancelled)?;
        if let Some(device) = rec.device_id.clone() {
            if let Ok(slot) = self.slot(&device) {
                match prev {
                    JobState::Queued => {
                        slot.queue.remove(&rec.job_id);
                    }
                    JobState::Running => {
                        if let Some(r) = lock(&slot.running).as_ref().filter(|r| r.job_id == rec.job_id) {
                            r.cancel.cancel();
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn run_one(&self, slot: &DeviceSlot, job_id: &JobId) {
        let Ok(job) = self.job(job_id) else { return };
        let (program, shots, seed, est) = {
            let mut rec = lock(&job);
            if rec.state != JobState::Queued || self.transition(&mut rec, JobState::Running).is_err() {
                return;
            }
            (rec.program.clone().unwrap_or_default(), rec.shots, rec.seed, rec.est_exec_s.unwrap_or(0.0))
        };
        let cancel = CancelToken::new();
        *lock(&slot.running) =
            Some(RunningJob { job_id: job_id.clone(), started_at: self.now(), est_exec_s: est, cancel: cancel.clone() });

        let outcome = catch_unwind(AssertUnwindSafe(|| slot.plugin.execute(&program, shots, seed, &cancel)))
            .unwrap_or_else(|_| Err(ExecutionError::Device("plugin panicked".into())));

        let mut rec = lock(&job);
        if rec.state == JobState::Running {
            let _ = match outcome {
                Ok(counts) if counts.shots_total == shots && counts.is_consistent() => {
                    rec.result = Some(counts);
                    self.transition(&mut rec, JobState::Done)
                }
                Ok(counts) => {
                    rec.error = Some(format!("plugin returned {} counts for {shots} shots", counts.shots_total));
                    self.transition(&mut rec, JobState::Failed)
                }
                Err(ExecutionError::Cancelled) => self.cancel_locked(&mut rec),
                Err(e) => {
                    rec.error = Some(e.to_string());
                    self.transition(&mut rec, JobState::Failed)
                }
            };
        }
        drop(rec);
        *lock(&slot.running) = None;
    }
}

fn device_worker(inner: Weak<Inner>, slot: Arc<DeviceSlot>, clock: Arc<dyn Clock>) {
    loop {
        let entry = slot.queue.wait_next(|| clock.now(), WORKER_POLL);
        let Some(inner) = inner.upgrade() else { return };
        if inner.shutdown.load(Ordering::SeqCst) {
            return;
        }
        if let Some(entry) = entry {
            inner.run_one(&slot, &entry.job_id);
        }
    }
}

/// Checks a low-level program against a device: native gates only and every
/// two-qubit gate on a coupling edge.
pub fn validate_program(device: &DeviceProperties, program: &str) -> Result<QuantumCircuit, QdmiError> {
    let circuit = parse_lowlevel(program).map_err(|e| QdmiError::Validation(e.to_string()))?;
    if circuit.level != Level::Native {
        return Err(QdmiError::Validation("program is not native".into()));
    }
    if let Some(d) = &circuit.device {
        if d != &device.device_id {
            return Err(QdmiError::Validation(format!("program targets `{d}`, not `{}`", device.device_id)));
        }
    }
    if circuit.num_qubits > device.num_qubits {
        return Err(QdmiError::Validation(format!(
            "program declares {} qubits, device has {}",
            circuit.num_qubits, device.num_qubits
        )));
    }
    for (i, op) in circuit.ops.iter().enumerate() {
        if op.gate != Gate::Barrier && !device.native_gates.contains(&op.gate) {
            return Err(QdmiError::Validation(format!("op {i}: `{}` is not native on {}", op.gate, device.device_id)));
        }
        if op.gate != Gate::Barrier && op.qubits.len() == 2 && !device.is_coupled(op.qubits[0], op.qubits[1]) {
            return Err(QdmiError::Validation(format!(
                "op {i}: `{}` on uncoupled qubits {} and {}",
                op.gate, op.qubits[0], op.qubits[1]
            )));
        }
    }
    Ok(circuit)
}

impl Qdmi {
    pub fn new(config: QdmiConfig, clock: Arc<dyn Clock>) -> Self {
        Qdmi {
            inner: Arc::new(Inner {
                config,
                clock,
                sessions: Mutex::new(HashMap::new()),
                devices: RwLock::new(BTreeMap::new()),
                jobs: RwLock::new(HashMap::new()),
                job_order: Mutex::new(Vec::new()),
                log: Mutex::new(Vec::new()),
                observers: RwLock::new(Vec::new()),
                ids: IdGenerator::default(),
                shutdown: AtomicBool::new(false),
            }),
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    pub fn now(&self) -> f64 {
        self.inner.now()
    }

    pub fn config(&self) -> &QdmiConfig {
        &self.inner.config
    }

    // ---- sessions ----

    pub fn session_open(&self, token: &str) -> Result<Session, QdmiError> {
        if token.is_empty() || !self.inner.config.allow_list.contains(token) {
            return Err(QdmiError::Auth("token not in allow-list".into()));
        }
        let session = Session {
            session_id: SessionId(new_session_token()),
            owner: token.to_string(),
            created_at: self.now(),
            open: true,
        };
        lock(&self.inner.sessions).insert(session.session_id.clone(), session.clone());
        Ok(session)
    }

    pub fn session(&self, id: &SessionId) -> Result<Session, QdmiError> {
        lock(&self.inner.sessions).get(id).cloned().ok_or_else(|| QdmiError::Auth("unknown session".into()))
    }

    pub fn check_session(&self, id: &SessionId) -> Result<(), QdmiError> {
        self.inner.check_session(id)
    }

    /// Closes a session and cancels its non-terminal jobs.
    pub fn session_close(&self, id: &SessionId) -> Result<(), QdmiError> {
        {
            let mut sessions = lock(&self.inner.sessions);
            let s = sessions.get_mut(id).ok_or_else(|| QdmiError::Auth("unknown session".into()))?;
            if !s.open {
                return Err(QdmiError::AlreadyClosed);
            }
            s.open = false;
        }
        let jobs: Vec<_> = self.inner.jobs.read().unwrap().values().cloned().collect();
        for job in jobs {
            let mut rec = lock(&job);
            if &rec.session_id == id && !rec.state.is_terminal() {
                self.inner.cancel_locked(&mut rec)?;
            }
        }
        Ok(())
    }

    // ---- devices ----

    pub fn register_device(&self, plugin: Arc<dyn DevicePlugin>) -> Result<String, QdmiError> {
        let properties = plugin.static_properties();
        properties.validate().map_err(QdmiError::InvalidProperties)?;
        let id = properties.device_id.clone();
        let slot = Arc::new(DeviceSlot {
            queue: DeviceQueue::new(id.clone()),
            properties,
            plugin,
            running: Mutex::new(None),
        });
        {
            let mut devices = self.inner.devices.write().unwrap();
            if devices.contains_key(&id)
                || devices.values().any(|d| d.properties.display_name == slot.properties.display_name)
            {
                return Err(QdmiError::DuplicateDevice(id));
            }
            devices.insert(id.clone(), slot.clone());
        }
        let weak = Arc::downgrade(&self.inner);
        let clock = self.inner.clock.clone();
        thread::Builder::new()
            .name(format!("qdmi-{id}"))
            .spawn(move || device_worker(weak, slot, clock))
            .expect("spawn device worker");
        Ok(id)
    }

    pub fn device_list(&self) -> Vec<String> {
        self.inner.devices.read().unwrap().keys().cloned().collect()
    }

    pub fn device_properties(&self, device_id: &str) -> Result<DeviceProperties, QdmiError> {
        Ok(self.inner.slot(device_id)?.properties.clone())
    }

    pub fn telemetry(&self, device_id: &str) -> Result<TelemetrySnapshot, QdmiError> {
        Ok(self.inner.slot(device_id)?.plugin.telemetry(self.now()))
    }

    pub fn query_static(&self, device_id: &str, key: &str) -> Result<Value, QdmiError> {
        let p = self.device_properties(device_id)?;
        Ok(match key {
            "num_qubits" => json!(p.num_qubits),
            "native_gates" => Value::Array(
                p.native_gates
                    .iter()
                    .map(|g| json!({"name": g.name(), "qubits": g.num_qubits(), "params": g.num_params()}))
                    .collect(),
            ),
            "coupling_map" => json!(p.coupling_map),
            "gate_durations" => json!(p.gate_durations),
            "shot_overhead" => json!(p.shot_overhead),
            "setup_overhead" => json!(p.setup_overhead),
            other => return Err(QdmiError::UnknownKey(other.to_string())),
        })
    }

    pub fn query_dynamic(&self, device_id: &str, key: &str) -> Result<Value, QdmiError> {
        let slot = self.inner.slot(device_id)?;
        if !DYNAMIC_KEYS.contains(&key) {
            return Err(QdmiError::UnknownKey(key.to_string()));
        }
        let snap = slot.plugin.telemetry(self.now());
        Ok(match key {
            "gate_fidelity" => json!(snap.gate_fidelity),
            "t1" => json!(snap.t1),
            "t2" => json!(snap.t2),
            "readout_fidelity" => json!(snap.readout_fidelity),
            "confusion" => json!(snap.confusion),
            "temperature_mK" => json!(snap.temperature_mk),
            _ => json!(snap.calibrated_at),
        })
    }

    // ---- jobs ----

    fn check_spec(&self, spec: &JobSpec) -> Result<(), QdmiError> {
        if spec.shots == 0 || spec.shots > self.inner.config.max_shots {
            return Err(QdmiError::Limit(format!("shots must be in 1..={}", self.inner.config.max_shots)));
        }
        if spec.priority > 9 {
            return Err(QdmiError::Validation(format!("priority {} outside 0..=9", spec.priority)));
        }
        Ok(())
    }

    fn new_record(&self, session: &SessionId, spec: &JobSpec, state: JobState) -> JobRecord {
        let now = self.now();
        let job_id = JobId(self.inner.ids.next(now));
        let seed = spec.seed.unwrap_or_else(|| ids::time_seed(now, &job_id.0));
        JobRecord {
            job_id,
            session_id: session.clone(),
            device_id: None,
            program: None,
            shots: spec.shots,
            priority: spec.priority,
            seed,
            state,
            seq: None,
            est_exec_s: None,
            transitions: vec![StateStamp { state, at: now }],
            result: None,
            error: None,
        }
    }

    fn enqueue_locked(&self, slot: &DeviceSlot, rec: &mut JobRecord) {
        let seq = slot.queue.enqueue(rec.job_id.clone(), rec.priority, rec.session_id.clone(), rec.est_exec_s.unwrap_or(0.0));
        rec.seq = Some(seq);
    }

    /// Device-level submission: validates the program and queues it directly.
    pub fn job_submit(
        &self,
        session: &SessionId,
        device_id: &str,
        program: &str,
        spec: JobSpec,
    ) -> Result<JobId, QdmiError> {
        self.inner.check_session(session)?;
        let slot = self.inner.slot(device_id)?;
        self.check_spec(&spec)?;
        let circuit = validate_program(&slot.properties, program)?;
        let mut rec = self.new_record(session, &spec, JobState::Queued);
        rec.device_id = Some(device_id.to_string());
        rec.program = Some(program.to_string());
        rec.est_exec_s = Some(estimate_execution_time(&CircuitStats::from_circuit(&circuit), &slot.properties, spec.shots));
        let id = rec.job_id.clone();
        self.inner.insert_job(rec);
        // the worker locks the record before running it, so seq is set first
        let job = self.inner.job(&id)?;
        let mut rec = lock(&job);
        if rec.state == JobState::Queued {
            self.enqueue_locked(&slot, &mut rec);
        }
        Ok(id)
    }

    /// Orchestration entry point: creates a job in `RECEIVED`.
    pub fn job_receive(&self, session: &SessionId, spec: JobSpec) -> Result<JobId, QdmiError> {
        self.inner.check_session(session)?;
        self.check_spec(&spec)?;
        let rec = self.new_record(session, &spec, JobState::Received);
        let id = rec.job_id.clone();
        self.inner.insert_job(rec);
        Ok(id)
    }

    pub fn job_schedule(&self, job_id: &JobId, device_id: &str) -> Result<(), QdmiError> {
        self.inner.slot(device_id)?;
        let job = self.inner.job(job_id)?;
        let mut rec = lock(&job);
        self.inner.transition(&mut rec, JobState::Scheduled)?;
        rec.device_id = Some(device_id.to_string());
        Ok(())
    }

    pub fn job_compiled(&self, job_id: &JobId, program: String) -> Result<(), QdmiError> {
        let job = self.inner.job(job_id)?;
        let mut rec = lock(&job);
        self.inner.transition(&mut rec, JobState::Compiled)?;
        rec.program = Some(program);
        Ok(())
    }

    /// Validates the compiled program and moves the job into its device queue.
    pub fn job_dispatch(&self, job_id: &JobId) -> Result<(), QdmiError> {
        let job = self.inner.job(job_id)?;
        let mut rec = lock(&job);
        let device = rec.device_id.clone().ok_or_else(|| QdmiError::Validation("job has no device".into()))?;
        let slot = self.inner.slot(&device)?;
        let program = rec.program.clone().ok_or_else(|| QdmiError::Validation("job has no program".into()))?;
        let circuit = validate_program(&slot.properties, &program)?;
        rec.est_exec_s = Some(estimate_execution_time(&CircuitStats::from_circuit(&circuit), &slot.properties, rec.shots));
        self.inner.transition(&mut rec, JobState::Queued)?;
        self.enqueue_locked(&slot, &mut rec);
        Ok(())
    }

    /// Marks a not-yet-queued job as failed.
    pub fn job_fail(&self, job_id: &JobId, message: impl Into<String>) -> Result<(), QdmiError> {
        let job = self.inner.job(job_id)?;
        let mut rec = lock(&job);
        self.inner.transition(&mut rec, JobState::Failed)?;
        rec.error = Some(message.into());
        Ok(())
    }

    pub fn job_status(&self, job_id: &JobId) -> Result<JobState, QdmiError> {
        let job = self.inner.job(job_id)?;
        let state = lock(&job).state;
        Ok(state)
    }

    pub fn job_record(&self, job_id: &JobId) -> Result<JobRecord, QdmiError> {
        let job = self.inner.job(job_id)?;
        let rec = lock(&job).clone();
        Ok(rec)
    }

    pub fn job_result(&self, job_id: &JobId) -> Result<Counts, QdmiError> {
        let rec = self.job_record(job_id)?;
        match (rec.state, rec.result) {
            (JobState::Done, Some(c)) => Ok(c),
            (state, _) => Err(QdmiError::NotDone(state)),
        }
    }

    pub fn job_cancel(&self, job_id: &JobId) -> Result<(), QdmiError> {
        let job = self.inner.job(job_id)?;
        let mut rec = lock(&job);
        self.inner.cancel_locked(&mut rec)
    }

    /// All jobs in creation order.
    pub fn jobs(&self) -> Vec<JobRecord> {
        let order = lock(&self.inner.job_order).clone();
        let jobs = self.inner.jobs.read().unwrap();
        order.iter().filter_map(|id| jobs.get(id)).map(|j| lock(j).clone()).collect()
    }

    /// Re-inserts a job read back from a persisted log.
    pub fn restore_job(&self, record: JobRecord) -> Result<(), QdmiError> {
        if self.inner.jobs.read().unwrap().contains_key(&record.job_id) {
            return Err(QdmiError::Validation(format!("job {} already present", record.job_id)));
        }
        if record.transitions.is_empty() || !record.state.is_terminal() {
            return Err(QdmiError::Validation("only terminal jobs can be restored".into()));
        }
        lock(&self.inner.job_order).push(record.job_id.clone());
        self.inner.jobs.write().unwrap().insert(record.job_id.clone(), Arc::new(Mutex::new(record)));
        Ok(())
    }

    pub fn transition_log(&self) -> Vec<TransitionEvent> {
        lock(&self.inner.log).clone()
    }

    /// Registers a callback run on every state change (with the job locked).
    pub fn on_transition(&self, observer: impl Fn(&TransitionEvent, &JobRecord) + Send + Sync + 'static) {
        self.inner.observers.write().unwrap().push(Arc::new(observer));
    }

    // ---- queue views ----

    pub fn queue_len(&self, device_id: &str) -> Result<usize, QdmiError> {
        Ok(self.inner.slot(device_id)?.queue.len())
    }

    pub fn is_busy(&self, device_id: &str) -> Result<bool, QdmiError> {
        Ok(lock(&self.inner.slot(device_id)?.running).is_some())
    }

    /// Σ of estimated run times ahead: queued jobs plus the remaining
    /// estimate of the running job (floored at zero).
    pub fn estimate_wait(&self, device_id: &str) -> Result<f64, QdmiError> {
        let slot = self.inner.slot(device_id)?;
        let running = lock(&slot.running)
            .as_ref()
            .map(|r| (r.est_exec_s - (self.now() - r.started_at)).max(0.0))
            .unwrap_or(0.0);
        Ok(slot.queue.pending_estimate() + running)
    }

    pub fn reserve(&self, device_id: &str, start: f64, end: f64, owner: &SessionId) -> Result<Reservation, QdmiError> {
        self.inner.check_session(owner)?;
        Ok(self.inner.slot(device_id)?.queue.reserve(start, end, owner.clone())?)
    }

    pub fn release(&self, reservation: &Reservation) -> Result<(), QdmiError> {
        Ok(self.inner.slot(&reservation.device_id)?.queue.release(reservation.id)?)
    }

    /// Stops device workers after their current execution.
    pub fn shutdown(&self) {
        self.inner.shutdown.store(true, Ordering::SeqCst);
        for slot in self.inner.devices.read().unwrap().values() {
            slot.queue.wake();
        }
    }
}
