use std::collections::BTreeSet;

use super::*;
use crate::backends::{builtin_profile, FlakyDevice, SimulatorControls, SimulatorDevice};
use crate::clock::{Clock, ManualClock};
use crate::qdmi::{DevicePlugin, QdmiConfig};

const BELL: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nh q[0];\ncx q[0],q[1];\nmeasure q[0] -> c[0];\nmeasure q[1] -> c[1];\n";
const WAIT: Duration = Duration::from_secs(20);

struct Rig {
    orch: Orchestrator,
    session: SessionId,
    sims: Vec<Arc<SimulatorDevice>>,
}

fn rig_with(readout_noise: bool) -> Rig {
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(5000.0));
    let qdmi = Qdmi::new(QdmiConfig::with_tokens(["t"]), clock.clone());
    let mut sims = Vec::new();
    for id in ["sc20", "ion5"] {
        let sim = Arc::new(SimulatorDevice::new(builtin_profile(id).unwrap(), clock.clone()).with_readout_noise(readout_noise));
        qdmi.register_device(sim.clone()).unwrap();
        sims.push(sim);
    }
    let session = qdmi.session_open("t").unwrap().session_id;
    Rig { orch: Orchestrator::new(qdmi, OrchestratorConfig::default(), SelectorRegistry::new()), session, sims }
}

fn rig() -> Rig {
    rig_with(false)
}

fn done(r: &Rig, id: &JobId) -> ResultEnvelope {
    assert_eq!(r.orch.wait(id, WAIT).unwrap(), JobState::Done, "{:?}", r.orch.job(id).unwrap());
    r.orch.result(id).unwrap()
}

#[test]
fn bell_runs_end_to_end() {
    let r = rig();
    let id = r.orch.submit(&r.session, &SubmissionRequest::new(BELL, 1000), Origin::Remote).unwrap();
    let env = done(&r, &id);
    assert!(["sc20", "ion5"].contains(&env.metadata.device_id.as_str()));
    assert_eq!(env.counts.shots_total, 1000);
    assert!((env.histogram.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(env.counts.counts.keys().all(|k| k == "00" || k == "11"));
    let cal = env.metadata.calibration.as_ref().unwrap();
    assert!(cal.taken_at <= env.metadata.started_at.unwrap());
    assert!(env.metadata.pipeline.is_some() && env.metadata.compile_stats.is_some());
    assert_eq!(r.orch.result(&id).unwrap(), env);
    let states: Vec<JobState> = r.orch.job(&id).unwrap().transitions.iter().map(|s| s.state).collect();
    use JobState::*;
    assert_eq!(states, [Received, Scheduled, Compiled, Queued, Running, Done]);
}

#[test]
fn override_and_origin() {
    let r = rig();
    let mut req = SubmissionRequest::new(BELL, 100);
    req.device = Some("ion5".into());
    req.priority = 9;
    let id = r.orch.submit(&r.session, &req, Origin::Local).unwrap();
    assert_eq!(done(&r, &id).metadata.device_id, "ion5");
    assert_eq!(r.orch.job(&id).unwrap().priority, 9);
    req.priority = 3;
    let id = r.orch.submit(&r.session, &req, Origin::Local).unwrap();
    assert_eq!(r.orch.job(&id).unwrap().priority, 4);
    let id = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    assert_eq!(r.orch.job(&id).unwrap().priority, 3);
}

#[test]
fn synchronous_rejections_create_no_job() {
    let r = rig();
    let bad = SubmissionRequest::new("OPENQASM 2.0;\nqreg q[1];\nfoo q[0];", 10);
    assert!(matches!(r.orch.submit(&r.session, &bad, Origin::Remote), Err(OrchestratorError::Parse(_))));
    let mut req = SubmissionRequest::new(BELL, 0);
    assert!(matches!(r.orch.submit(&r.session, &req, Origin::Remote), Err(OrchestratorError::Invalid(_))));
    req.shots = 10;
    req.device = Some("nowhere".into());
    assert!(matches!(r.orch.submit(&r.session, &req, Origin::Remote), Err(OrchestratorError::Invalid(_))));
    req.device = None;
    req.policy = Some(SchedulingPolicy { w_esp: 2.0, ..Default::default() });
    assert!(matches!(r.orch.submit(&r.session, &req, Origin::Remote), Err(OrchestratorError::Invalid(_))));
    assert!(matches!(
        r.orch.submit(&SessionId::from("nope"), &SubmissionRequest::new(BELL, 10), Origin::Remote),
        Err(OrchestratorError::Qdmi(QdmiError::Auth(_)))
    ));
    assert!(r.orch.qdmi().jobs().is_empty());
}

#[test]
fn failures_after_acceptance_mark_the_job_failed() {
    let r = rig();
    // wider than ion5: compilation fails
    let wide = "OPENQASM 2.0;\nqreg q[6];\nh q[5];\n";
    let mut req = SubmissionRequest::new(wide, 10);
    req.device = Some("ion5".into());
    let id = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    assert_eq!(r.orch.wait(&id, WAIT).unwrap(), JobState::Failed);
    assert!(r.orch.job(&id).unwrap().error.unwrap().contains("compile"));

    for sim in &r.sims {
        sim.set_controls(SimulatorControls { temperature_mk: Some(500.0), ..Default::default() });
    }
    let before = r.orch.qdmi().jobs().len();
    assert_eq!(
        r.orch.submit(&r.session, &SubmissionRequest::new(BELL, 10), Origin::Remote),
        Err(OrchestratorError::NoHealthyDevice)
    );
    assert_eq!(r.orch.qdmi().jobs().len(), before);
}

/// Healthy for the first `healthy_reads` telemetry reads, overheated afterwards.
struct Overheating {
    inner: SimulatorDevice,
    healthy_reads: std::sync::atomic::AtomicUsize,
}

impl DevicePlugin for Overheating {
    fn static_properties(&self) -> DeviceProperties {
        self.inner.static_properties()
    }

    fn telemetry(&self, now: f64) -> crate::qdmi::TelemetrySnapshot {
        let mut snap = self.inner.telemetry(now);
        let left = self.healthy_reads.load(std::sync::atomic::Ordering::SeqCst);
        if left == 0 {
            snap.temperature_mk = 500.0;
        } else {
            self.healthy_reads.store(left - 1, std::sync::atomic::Ordering::SeqCst);
        }
        snap
    }

    fn execute(&self, program: &str, shots: u64, seed: u64, cancel: &crate::qdmi::CancelToken) -> Result<Counts, crate::qdmi::ExecutionError> {
        self.inner.execute(program, shots, seed, cancel)
    }
}

#[test]
fn health_lost_after_acceptance_fails_the_job() {
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(100.0));
    let qdmi = Qdmi::new(QdmiConfig::with_tokens(["t"]), clock.clone());
    let inner = SimulatorDevice::new(builtin_profile("ion5").unwrap(), clock);
    qdmi.register_device(Arc::new(Overheating { inner, healthy_reads: 1.into() })).unwrap();
    let session = qdmi.session_open("t").unwrap().session_id;
    let orch = Orchestrator::new(qdmi, OrchestratorConfig::default(), SelectorRegistry::new());
    let id = orch.submit(&session, &SubmissionRequest::new(BELL, 10), Origin::Remote).unwrap();
    assert_eq!(orch.wait(&id, WAIT).unwrap(), JobState::Failed);
    assert_eq!(orch.job(&id).unwrap().error.as_deref(), Some("no healthy device"));
}

#[test]
fn queued_result_and_cancel() {
    let r = rig();
    for sim in &r.sims {
        sim.set_controls(SimulatorControls { exec_delay: Some(Duration::from_millis(400)), ..Default::default() });
    }
    let mut req = SubmissionRequest::new(BELL, 10);
    req.device = Some("sc20".into());
    let first = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    let second = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    let deadline = Instant::now() + WAIT;
    while r.orch.job(&second).unwrap().state != JobState::Queued {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(2));
    }
    assert!(matches!(r.orch.result(&second), Err(QdmiError::NotDone(_))));
    r.orch.cancel(&second).unwrap();
    assert_eq!(r.orch.job(&second).unwrap().state, JobState::Cancelled);
    assert_eq!(r.orch.wait(&first, WAIT).unwrap(), JobState::Done);
    assert!(matches!(r.orch.result(&JobId::from("missing")), Err(QdmiError::UnknownJob(_))));
}

#[test]
fn pinned_seed_matches_direct_execution() {
    let r = rig();
    let mut req = SubmissionRequest::new(BELL, 2000);
    req.seed = Some(77);
    req.device = Some("sc20".into());
    let id = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    let env = done(&r, &id);
    let program = r.orch.job(&id).unwrap().program.unwrap();
    let direct = r.sims[0].execute(&program, 2000, 77, &crate::qdmi::CancelToken::new()).unwrap();
    assert_eq!(env.counts, direct);
    let again = r.orch.submit(&r.session, &req, Origin::Remote).unwrap();
    assert_eq!(done(&r, &again).counts, direct);
}

#[test]
fn mitigation_uses_compile_time_confusion() {
    let r = rig_with(true);
    let x = "OPENQASM 2.0;\nqreg q[1];\ncreg c[1];\nx q[0];\nmeasure q[0] -> c[0];\n";
    let mut req = SubmissionRequest::new(x, 20_000);
    req.mitigate = true;
    req.device = Some("ion5".into());
    let env = done(&r, &r.orch.submit(&r.session, &req, Origin::Remote).unwrap());
    let raw = env.histogram.get("1").copied().unwrap_or(0.0);
    let mitigated = env.mitigated_histogram.as_ref().unwrap().get("1").copied().unwrap_or(0.0);
    assert!(raw < 1.0);
    assert!(mitigated > raw, "{raw} -> {mitigated}");
    assert!((env.mitigated_histogram.unwrap().values().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn injected_failures_never_leave_jobs_in_limbo() {
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(100.0));
    let qdmi = Qdmi::new(QdmiConfig::with_tokens(["t"]), clock.clone());
    for id in ["sc20", "ion5"] {
        let flaky = FlakyDevice::new(SimulatorDevice::new(builtin_profile(id).unwrap(), clock.clone()), 0.3);
        qdmi.register_device(Arc::new(flaky)).unwrap();
    }
    let session = qdmi.session_open("t").unwrap().session_id;
    let orch = Orchestrator::new(qdmi.clone(), OrchestratorConfig::default(), SelectorRegistry::new());
    let ids: Vec<JobId> =
        (0..30).map(|_| orch.submit(&session, &SubmissionRequest::new(BELL, 50), Origin::Remote).unwrap()).collect();
    let mut seen = BTreeSet::new();
    for id in &ids {
        let state = orch.wait(id, WAIT).unwrap();
        assert!(state.is_terminal());
        seen.insert(state);
    }
    assert!(seen.contains(&JobState::Failed) && seen.contains(&JobState::Done));
}

#[test]
fn device_listing() {
    let r = rig();
    let devices = r.orch.devices();
    let ids: Vec<&str> = devices.iter().map(|d| d.properties.device_id.as_str()).collect();
    assert_eq!(ids, ["ion5", "sc20"]);
    assert!(devices.iter().all(|d| d.fomac.healthy && d.queue_length == 0));
}
