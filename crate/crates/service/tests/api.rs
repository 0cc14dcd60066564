use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use ministack_core::backends::{builtin_profile, SimulatorControls, SimulatorDevice};
use ministack_core::clock::{Clock, ManualClock};
use ministack_core::qdmi::{CancelToken, DevicePlugin, JobState};
use ministack_service::api::{ErrorBody, JobView, SessionResponse, SubmitResponse};
use ministack_service::{build_with, AppState, ServiceConfig};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

const BELL: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nh q[0];\ncx q[0],q[1];\nmeasure q[0] -> c[0];\nmeasure q[1] -> c[1];\n";
const TOKEN: &str = "secret";

struct Server {
    base: String,
    http: Client,
    sims: Vec<Arc<SimulatorDevice>>,
    state: AppState,
}

fn config() -> ServiceConfig {
    ServiceConfig { tokens: vec![TOKEN.into()], readout_noise: false, ..Default::default() }
}

fn start(config: ServiceConfig) -> Server {
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(10_000.0));
    let sims: Vec<Arc<SimulatorDevice>> = ["sc20", "ion5"]
        .iter()
        .map(|id| Arc::new(SimulatorDevice::new(builtin_profile(id).unwrap(), clock.clone()).with_readout_noise(config.readout_noise)))
        .collect();
    let plugins = sims.iter().map(|s| s.clone() as Arc<dyn DevicePlugin>).collect();
    let state = build_with(&config, clock, plugins).unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    let serve_state = state.clone();
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            ministack_service::run(listener, serve_state, std::future::pending()).await.unwrap();
        });
    });
    Server { base: format!("http://{addr}"), http: Client::new(), sims, state }
}

impl Server {
    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn session(&self) -> String {
        let r = self.http.post(self.url("/v1/sessions")).json(&json!({"token": TOKEN})).send().unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        r.json::<SessionResponse>().unwrap().session_id.0
    }

    fn get(&self, session: &str, path: &str) -> Response {
        self.http.get(self.url(path)).bearer_auth(session).send().unwrap()
    }

    fn submit(&self, session: &str, body: Value) -> Response {
        self.http.post(self.url("/v1/jobs")).bearer_auth(session).json(&body).send().unwrap()
    }

    fn submit_ok(&self, session: &str, body: Value) -> String {
        let r = self.submit(session, body);
        assert_eq!(r.status(), StatusCode::CREATED);
        r.json::<SubmitResponse>().unwrap().job_id.0
    }

    fn job(&self, session: &str, id: &str) -> JobView {
        let r = self.get(session, &format!("/v1/jobs/{id}"));
        assert_eq!(r.status(), StatusCode::OK);
        r.json().unwrap()
    }

    fn wait_terminal(&self, session: &str, id: &str) -> JobView {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let view = self.job(session, id);
            if view.state.is_terminal() || Instant::now() > deadline {
                return view;
            }
            thread::sleep(Duration::from_millis(10));
        }
    }
}

fn error_of(r: Response) -> (StatusCode, ErrorBody) {
    let status = r.status();
    (status, r.json().unwrap())
}

#[test]
fn sessions_and_bearer_auth() {
    let s = start(config());
    let r = s.http.post(s.url("/v1/sessions")).json(&json!({"token": "wrong"})).send().unwrap();
    assert_eq!(error_of(r).0, StatusCode::UNAUTHORIZED);
    let session = s.session();
    assert_eq!(session.len(), 32);
    assert_eq!(s.http.get(s.url("/v1/devices")).send().unwrap().status(), StatusCode::UNAUTHORIZED);
    assert_eq!(s.get("not-a-session", "/v1/devices").status(), StatusCode::UNAUTHORIZED);
    assert_eq!(s.get(&session, "/v1/devices").status(), StatusCode::OK);
    let r = s.http.delete(s.url("/v1/sessions")).bearer_auth(&session).send().unwrap();
    assert_eq!(r.status(), StatusCode::NO_CONTENT);
    assert_eq!(s.get(&session, "/v1/devices").status(), StatusCode::UNAUTHORIZED);
}

#[test]
fn bell_end_to_end() {
    let s = start(config());
    let session = s.session();
    let id = s.submit_ok(&session, json!({"circuit": BELL, "shots": 2000}));
    let view = s.wait_terminal(&session, &id);
    assert_eq!(view.state, JobState::Done, "{view:?}");
    let states: Vec<JobState> = view.transitions.iter().map(|t| t.state).collect();
    use JobState::*;
    assert_eq!(states, [Received, Scheduled, Compiled, Queued, Running, Done]);

    let raw = s.get(&session, &format!("/v1/jobs/{id}/result")).text().unwrap();
    assert_eq!(s.get(&session, &format!("/v1/jobs/{id}/result")).text().unwrap(), raw);
    let env: Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(env["job_id"], json!(id));
    assert_eq!(env["counts"]["shots_total"], json!(2000));
    let hist = env["histogram"].as_object().unwrap();
    assert!(hist.keys().all(|k| k == "00" || k == "11"));
    assert!((hist.values().map(|v| v.as_f64().unwrap()).sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(env["mitigated_histogram"].is_null());
    let meta = &env["metadata"];
    assert!(["sc20", "ion5"].contains(&meta["device_id"].as_str().unwrap()));
    assert_eq!(meta["device_id"].as_str(), view.device_id.as_deref());
    assert!(meta["calibration"]["taken_at"].as_f64().unwrap() <= meta["started_at"].as_f64().unwrap());
    assert_eq!(meta["origin"], json!("LOCAL"));
    assert_eq!(meta["pipeline"]["provenance"]["selector"], json!("default"));
    assert_eq!(meta["policy_weights"], json!({"w_esp": 0.5, "w_wait": 0.3, "w_exec": 0.2}));
    assert!(meta["compile_stats"]["esp_after"].as_f64().unwrap() > 0.0);
}

#[test]
fn error_statuses() {
    let s = start(config());
    let session = s.session();
    let (status, body) = error_of(s.submit(&session, json!({"circuit": "OPENQASM 2.0;\nqreg q[1];\nbogus q[0];", "shots": 5})));
    assert_eq!((status, body.error.as_str()), (StatusCode::BAD_REQUEST, "parse_error"));
    let r = s.http.post(s.url("/v1/jobs")).bearer_auth(&session).body("{not json").send().unwrap();
    assert_eq!(error_of(r).0, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(s.submit(&session, json!({"circuit": BELL, "shots": 0}))).0, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(s.submit(&session, json!({"circuit": BELL, "shots": 200_000}))).0, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(s.submit(&session, json!({"circuit": BELL, "shots": 5, "priority": 10}))).0, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(s.submit(&session, json!({"circuit": BELL, "shots": 5, "device": "nope"}))).0, StatusCode::BAD_REQUEST);
    assert!(s.state.orchestrator.qdmi().jobs().is_empty());

    let (status, body) = error_of(s.get(&session, "/v1/jobs/NOPE"));
    assert_eq!((status, body.error.as_str()), (StatusCode::NOT_FOUND, "unknown_job"));
    assert_eq!(error_of(s.get(&session, "/v1/devices/nope")).0, StatusCode::NOT_FOUND);
    assert_eq!(error_of(s.get(&session, "/v1/devices/nope/telemetry")).0, StatusCode::NOT_FOUND);
    assert_eq!(error_of(s.get(&session, "/v1/nothing")).0, StatusCode::NOT_FOUND);

    // six qubits do not fit ion5: accepted, then FAILED at compile time
    let wide = "OPENQASM 2.0;\nqreg q[6];\nh q[5];\n";
    let id = s.submit_ok(&session, json!({"circuit": wide, "shots": 5, "device": "ion5"}));
    let view = s.wait_terminal(&session, &id);
    assert_eq!(view.state, JobState::Failed);
    assert!(view.error.unwrap().contains("compile"));
    let (status, body) = error_of(s.get(&session, &format!("/v1/jobs/{id}/result")));
    assert_eq!((status, body.error.as_str()), (StatusCode::CONFLICT, "not_done"));
    let r = s.http.delete(s.url(&format!("/v1/jobs/{id}"))).bearer_auth(&session).send().unwrap();
    assert_eq!(error_of(r).0, StatusCode::CONFLICT);
}

#[test]
fn no_healthy_device_is_503() {
    let mut cfg = config();
    cfg.fomac.max_temperature_mk = 0.001;
    let s = start(cfg);
    let session = s.session();
    let (status, body) = error_of(s.submit(&session, json!({"circuit": BELL, "shots": 5})));
    assert_eq!((status, body.error.as_str()), (StatusCode::SERVICE_UNAVAILABLE, "no_healthy_device"));
    let devices: Value = s.get(&session, "/v1/devices").json().unwrap();
    assert!(devices.as_array().unwrap().iter().all(|d| d["fomac"]["healthy"] == json!(false)));
}

#[test]
fn origin_detection() {
    let s = start(config());
    let session = s.session();
    let id = s.submit_ok(&session, json!({"circuit": BELL, "shots": 5, "priority": 3}));
    assert_eq!(s.job(&session, &id).priority, 4);
    let id = s.submit_ok(&session, json!({"circuit": BELL, "shots": 5, "priority": 9}));
    assert_eq!(s.job(&session, &id).priority, 9);

    let s = start(ServiceConfig { local_cidrs: vec![], gateway_header: Some("x-hpc".into()), ..config() });
    let session = s.session();
    let id = s.submit_ok(&session, json!({"circuit": BELL, "shots": 5, "priority": 3}));
    assert_eq!(s.job(&session, &id).priority, 3);
    let r = s
        .http
        .post(s.url("/v1/jobs"))
        .bearer_auth(&session)
        .header("x-hpc", "login01")
        .json(&json!({"circuit": BELL, "shots": 5, "priority": 3}))
        .send()
        .unwrap();
    let id = r.json::<SubmitResponse>().unwrap().job_id.0;
    assert_eq!(s.job(&session, &id).priority, 4);
}

#[test]
fn devices_and_telemetry() {
    let s = start(config());
    let session = s.session();
    let list: Value = s.get(&session, "/v1/devices").json().unwrap();
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|d| d["properties"]["device_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["ion5", "sc20"]);
    let one: Value = s.get(&session, "/v1/devices/sc20").json().unwrap();
    assert_eq!(one["properties"]["num_qubits"], json!(20));
    assert_eq!(one["fomac"]["healthy"], json!(true));
    assert_eq!(one["queue_length"], json!(0));
    let snap: Value = s.get(&session, "/v1/devices/ion5/telemetry").json().unwrap();
    assert_eq!(snap["device_id"], json!("ion5"));
    assert_eq!(snap["taken_at"], json!(10_000.0));
}

#[test]
fn queue_length_and_cancel() {
    let s = start(config());
    for sim in &s.sims {
        sim.set_controls(SimulatorControls { exec_delay: Some(Duration::from_millis(400)), ..Default::default() });
    }
    let session = s.session();
    let ids: Vec<String> =
        (0..4).map(|_| s.submit_ok(&session, json!({"circuit": BELL, "shots": 5, "device": "sc20"}))).collect();
    let deadline = Instant::now() + Duration::from_secs(10);
    let queued = loop {
        let states: Vec<JobState> = ids.iter().map(|id| s.job(&session, id).state).collect();
        let queued = states.iter().filter(|s| **s == JobState::Queued).count();
        if queued == 3 && states.contains(&JobState::Running) || Instant::now() > deadline {
            break queued;
        }
        thread::sleep(Duration::from_millis(5));
    };
    assert_eq!(queued, 3);
    let dev: Value = s.get(&session, "/v1/devices/sc20").json().unwrap();
    assert_eq!(dev["queue_length"], json!(3));
    assert_eq!(dev["busy"], json!(true));

    let last = &ids[3];
    let r = s.http.delete(s.url(&format!("/v1/jobs/{last}"))).bearer_auth(&session).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.json::<JobView>().unwrap().state, JobState::Cancelled);
    assert_eq!(s.job(&session, last).state, JobState::Cancelled);
    assert_eq!(error_of(s.get(&session, &format!("/v1/jobs/{last}/result"))).0, StatusCode::CONFLICT);
    for sim in &s.sims {
        sim.set_controls(SimulatorControls::default());
    }
    for id in &ids[..3] {
        assert_eq!(s.wait_terminal(&session, id).state, JobState::Done);
    }
    let all: Vec<JobView> = s.get(&session, "/v1/jobs").json().unwrap();
    assert_eq!(all.len(), 4);
}

#[test]
fn pinned_seed_matches_direct_execution() {
    let s = start(config());
    let session = s.session();
    let body = json!({"circuit": BELL, "shots": 3000, "seed": 1234, "device": "sc20"});
    let a = s.submit_ok(&session, body.clone());
    let b = s.submit_ok(&session, body);
    let counts = |id: &str| {
        assert_eq!(s.wait_terminal(&session, id).state, JobState::Done);
        s.get(&session, &format!("/v1/jobs/{id}/result")).json::<Value>().unwrap()["counts"].clone()
    };
    let (ca, cb) = (counts(&a), counts(&b));
    assert_eq!(ca, cb);
    let program = s.job(&session, &a).program.unwrap();
    let direct = s.sims[0].execute(&program, 3000, 1234, &CancelToken::new()).unwrap();
    assert_eq!(ca, serde_json::to_value(direct).unwrap());
}

#[test]
fn mitigation_flag() {
    let s = start(ServiceConfig { readout_noise: true, ..config() });
    let session = s.session();
    let one = "OPENQASM 2.0;\nqreg q[1];\ncreg c[1];\nx q[0];\nmeasure q[0] -> c[0];\n";
    let id = s.submit_ok(&session, json!({"circuit": one, "shots": 20000, "mitigate": true, "seed": 5}));
    assert_eq!(s.wait_terminal(&session, &id).state, JobState::Done);
    let env: Value = s.get(&session, &format!("/v1/jobs/{id}/result")).json().unwrap();
    let raw = env["histogram"]["1"].as_f64().unwrap();
    let mitigated = env["mitigated_histogram"]["1"].as_f64().unwrap();
    assert!(raw < 1.0 && mitigated > raw, "{raw} {mitigated}");
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ministack-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn static_assets_are_served() {
    let dir = temp_dir("static");
    std::fs::write(dir.join("index.html"), "<h1>dashboard</h1>").unwrap();
    std::fs::write(dir.join("app.js"), "console.log(1)").unwrap();
    let s = start(ServiceConfig { static_dir: Some(dir.clone()), ..config() });
    let r = s.http.get(s.url("/")).send().unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert_eq!(r.text().unwrap(), "<h1>dashboard</h1>");
    assert_eq!(s.http.get(s.url("/app.js")).send().unwrap().text().unwrap(), "console.log(1)");
    assert_eq!(s.http.get(s.url("/missing.css")).send().unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(s.http.get(s.url("/v1/devices")).send().unwrap().status(), StatusCode::UNAUTHORIZED);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn job_log_replays_after_restart() {
    let dir = temp_dir("joblog");
    let log = dir.join("jobs.jsonl");
    let cfg = ServiceConfig { job_log: Some(log.clone()), ..config() };

    let first = start(cfg.clone());
    let session = first.session();
    let done = first.submit_ok(&session, json!({"circuit": BELL, "shots": 100, "seed": 9}));
    assert_eq!(first.wait_terminal(&session, &done).state, JobState::Done);
    let envelope = first.get(&session, &format!("/v1/jobs/{done}/result")).text().unwrap();
    // the envelope line is written off the job's thread
    let deadline = Instant::now() + Duration::from_secs(10);
    while !std::fs::read_to_string(&log).unwrap().contains("\"kind\":\"envelope\"") && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    for sim in &first.sims {
        sim.set_controls(SimulatorControls { exec_delay: Some(Duration::from_secs(3600)), ..Default::default() });
    }
    let stuck = first.submit_ok(&session, json!({"circuit": BELL, "shots": 100, "device": "ion5"}));
    let deadline = Instant::now() + Duration::from_secs(10);
    while first.job(&session, &stuck).state != JobState::Running && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(5));
    }
    assert_eq!(first.job(&session, &stuck).state, JobState::Running);
    std::fs::OpenOptions::new().append(true).open(&log).map(|mut f| std::io::Write::write_all(&mut f, b"garbage\n")).unwrap().unwrap();

    let second = start(cfg);
    let session = second.session();
    assert_eq!(second.get(&session, &format!("/v1/jobs/{done}/result")).text().unwrap(), envelope);
    let view = second.job(&session, &stuck);
    assert_eq!(view.state, JobState::Failed);
    assert_eq!(view.error.as_deref(), Some(ministack_service::joblog::RESTART_ERROR));
    assert_eq!(view.transitions.last().unwrap().state, JobState::Failed);
    let fresh = second.submit_ok(&session, json!({"circuit": BELL, "shots": 10}));
    assert_eq!(second.wait_terminal(&session, &fresh).state, JobState::Done);
    let ids: Vec<String> = second.get(&session, "/v1/jobs").json::<Vec<JobView>>().unwrap().into_iter().map(|v| v.job_id.0).collect();
    assert_eq!(ids, [done.clone(), stuck.clone(), fresh]);
    for sim in &first.sims {
        sim.set_controls(SimulatorControls::default());
    }
    std::fs::remove_dir_all(&dir).unwrap();
}
