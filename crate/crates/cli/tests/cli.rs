use std::path::PathBuf;
use std::process::{Command, Output};
use std::sync::Arc;
use std::thread;

use ministack_core::clock::{Clock, ManualClock};
use ministack_service::{build, ServiceConfig};

const BELL: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nh q[0];\ncx q[0],q[1];\nmeasure q[0] -> c[0];\nmeasure q[1] -> c[1];\n";

struct Env {
    endpoint: String,
    dir: PathBuf,
}

fn start(name: &str) -> Env {
    let config = ServiceConfig { tokens: vec!["tok".into()], readout_noise: false, ..Default::default() };
    let clock: Arc<dyn Clock> = Arc::new(ManualClock::new(50_000.0));
    let state = build(&config, clock).unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let endpoint = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            ministack_service::run(listener, state, std::future::pending()).await.unwrap();
        });
    });
    let dir = std::env::temp_dir().join(format!("ministack-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("bell.qasm"), BELL).unwrap();
    Env { endpoint, dir }
}

impl Env {
    fn cmd(&self) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_ministack"));
        c.env("MINISTACK_ENDPOINT", &self.endpoint)
            .env("MINISTACK_TOKEN", "tok")
            .env_remove("MINISTACK_CONFIG")
            .env("XDG_CONFIG_HOME", self.dir.join("xdg"))
            .current_dir(&self.dir);
        c
    }

    fn run(&self, args: &[&str]) -> Output {
        self.cmd().args(args).output().unwrap()
    }

    /// Raw GET body fetched without the CLI, for byte comparisons.
    fn raw_get(&self, path: &str) -> String {
        let http = reqwest::blocking::Client::new();
        let session: serde_json::Value = http
            .post(format!("{}/v1/sessions", self.endpoint))
            .json(&serde_json::json!({"token": "tok"}))
            .send()
            .unwrap()
            .json()
            .unwrap();
        http.get(format!("{}{path}", self.endpoint))
            .bearer_auth(session["session_id"].as_str().unwrap())
            .send()
            .unwrap()
            .text()
            .unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn submit_watch_and_result() {
    let env = start("submit");
    let out = env.run(&["submit", "bell.qasm", "--shots", "1000", "--seed", "7"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let id = stdout(&out).trim().to_string();
    assert_eq!(id.len(), 26);

    let out = env.run(&["watch", &id]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).trim_end().ends_with(&format!("{id} DONE")));

    let out = env.run(&["result", &id]);
    assert!(out.status.success());
    let table = stdout(&out);
    assert!(table.contains("1000 shots, seed 7"), "{table}");
    assert!(table.lines().any(|l| l.starts_with("00 ")) && table.lines().any(|l| l.starts_with("11 ")));

    let out = env.run(&["result", &id, "--output", "json"]);
    assert_eq!(stdout(&out), env.raw_get(&format!("/v1/jobs/{id}/result")) + "\n");

    let out = env.run(&["status", &id, "--output", "json"]);
    assert_eq!(stdout(&out), env.raw_get(&format!("/v1/jobs/{id}")) + "\n");
    let out = env.run(&["status", &id]);
    assert!(stdout(&out).contains("state     DONE"));

    let out = env.run(&["cancel", &id]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("409") && stderr(&out).contains("state_conflict"));
}

#[test]
fn submit_with_watch_flag_and_stdin() {
    let env = start("stdin");
    let mut child = env
        .cmd()
        .args(["submit", "-", "--shots", "50", "--device", "ion5", "--policy", "0.6,0.2,0.2", "--mitigate", "--watch"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    std::io::Write::write_all(child.stdin.as_mut().unwrap(), BELL.as_bytes()).unwrap();
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).trim_end().ends_with("DONE"));
}

#[test]
fn devices_json_is_the_raw_body() {
    let env = start("devices");
    let out = env.run(&["devices", "--output", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), env.raw_get("/v1/devices") + "\n");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    let table = stdout(&env.run(&["devices"]));
    assert!(table.starts_with("DEVICE"));
    assert!(table.contains("ion5") && table.contains("sc20"));
}

#[test]
fn failed_jobs_and_errors_exit_nonzero() {
    let env = start("errors");
    std::fs::write(env.dir.join("wide.qasm"), "OPENQASM 2.0;\nqreg q[6];\nh q[5];\n").unwrap();
    let out = env.run(&["submit", "wide.qasm", "--device", "ion5", "--watch"]);
    assert_eq!(out.status.code(), Some(1));
    let id = stdout(&out).lines().next().unwrap().to_string();
    assert!(stdout(&out).trim_end().ends_with("FAILED"));

    let out = env.run(&["result", &id]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not_done"), "{}", stderr(&out));

    std::fs::write(env.dir.join("bad.qasm"), "OPENQASM 2.0;\nqreg q[1];\nnope q[0];\n").unwrap();
    let out = env.run(&["submit", "bad.qasm"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("parse_error"));

    let out = env.run(&["status", "UNKNOWN"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("404"));
}

#[test]
fn usage_errors_exit_2() {
    let env = start("usage");
    assert_eq!(env.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(env.run(&["submit", "bell.qasm", "--policy", "1,2"]).status.code(), Some(2));
    assert_eq!(env.run(&["submit", "missing.qasm"]).status.code(), Some(2));
    assert_eq!(env.cmd().env_remove("MINISTACK_TOKEN").args(["devices"]).output().unwrap().status.code(), Some(2));
    assert_eq!(env.run(&["devices", "--endpoint", "nonsense"]).status.code(), Some(2));
}

#[test]
fn config_file_fills_gaps() {
    let env = start("config");
    let cfg = env.dir.join("xdg").join("ministack");
    std::fs::create_dir_all(&cfg).unwrap();
    std::fs::write(cfg.join("config.json"), format!(r#"{{"endpoint": "{}", "token": "tok", "output": "json"}}"#, env.endpoint)).unwrap();
    let out = env.cmd().env_remove("MINISTACK_ENDPOINT").env_remove("MINISTACK_TOKEN").args(["devices"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with('['));
    // flags win over the file
    let out = env.cmd().env_remove("MINISTACK_TOKEN").args(["devices", "--output", "table"]).output().unwrap();
    assert!(stdout(&out).starts_with("DEVICE"));
    let out = env.cmd().args(["devices", "--token", "wrong"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("401"));
}
