//! Client side of the job service's HTTP API: configuration resolution,
//! requests, and table rendering of the JSON bodies.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use reqwest::blocking::Client as Http;
use reqwest::{Method, Url};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const DEFAULT_ENDPOINT: &str = "http://127.0.0.1:8080";
pub const WATCH_INTERVAL: Duration = Duration::from_millis(500);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot reach the service: {0}")]
    Network(String),
    #[error("HTTP {status}: {body}")]
    Api { status: u16, body: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

/// Contents of the per-user config file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: Option<String>,
    pub token: Option<String>,
    pub output: Option<OutputFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub endpoint: Url,
    pub token: String,
    pub output: OutputFormat,
}

/// `$XDG_CONFIG_HOME/ministack/config.json`, else `~/.config/ministack/config.json`.
pub fn default_config_path() -> Option<PathBuf> {
    let base = std::env::var_os("XDG_CONFIG_HOME")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".config")))?;
    Some(base.join("ministack").join("config.json"))
}

pub fn read_file_config(path: &Path, required: bool) -> Result<FileConfig, CliError> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && !required => Ok(FileConfig::default()),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

/// Combines values already resolved from flags or the environment with the file.
pub fn resolve(endpoint: Option<String>, token: Option<String>, output: Option<OutputFormat>, file: FileConfig) -> Result<CliConfig, CliError> {
    let endpoint = endpoint.or(file.endpoint).unwrap_or_else(|| DEFAULT_ENDPOINT.into());
    let endpoint = Url::parse(&endpoint).map_err(|e| CliError::Usage(format!("endpoint `{endpoint}`: {e}")))?;
    if !matches!(endpoint.scheme(), "http" | "https") {
        return Err(CliError::Usage(format!("endpoint `{endpoint}` is not an http(s) URL")));
    }
    let token = token
        .or(file.token)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| CliError::Usage("no token: pass --token, set MINISTACK_TOKEN or add it to the config file".into()))?;
    Ok(CliConfig { endpoint, token, output: output.or(file.output).unwrap_or_default() })
}

/// Parses `w_esp,w_wait,w_exec`.
pub fn parse_policy(s: &str) -> Result<Value, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [w_esp, w_wait, w_exec] if parts.iter().all(|w| w.is_finite() && *w >= 0.0) => {
            Ok(json!({"w_esp": w_esp, "w_wait": w_wait, "w_exec": w_exec}))
        }
        _ => Err("expected three non-negative weights `w_esp,w_wait,w_exec`".into()),
    }
}

/// An authenticated connection: one session per invocation.
pub struct Client {
    http: Http,
    base: Url,
    session: String,
}

impl Client {
    pub fn connect(cfg: &CliConfig) -> Result<Self, CliError> {
        let http = Http::builder().timeout(Duration::from_secs(60)).build().map_err(|e| CliError::Network(e.to_string()))?;
        let mut client = Client { http, base: cfg.endpoint.clone(), session: String::new() };
        let body = client.call(Method::POST, "/v1/sessions", Some(json!({"token": cfg.token})))?;
        let v: Value = serde_json::from_str(&body).map_err(|e| CliError::Network(format!("bad session response: {e}")))?;
        client.session = v["session_id"].as_str().ok_or_else(|| CliError::Network("session response lacks session_id".into()))?.to_string();
        Ok(client)
    }

    /// Sends one request and returns the raw body of a 2xx response.
    pub fn call(&self, method: Method, path: &str, body: Option<Value>) -> Result<String, CliError> {
        let url = self.base.join(path).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut req = self.http.request(method, url);
        if !self.session.is_empty() {
            req = req.bearer_auth(&self.session);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().map_err(|e| CliError::Network(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| CliError::Network(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else {
            Err(CliError::Api { status: status.as_u16(), body: text })
        }
    }

    pub fn get(&self, path: &str) -> Result<String, CliError> {
        self.call(Method::GET, path, None)
    }
}

pub fn job_path(id: &str) -> String {
    format!("/v1/jobs/{id}")
}

fn parse(body: &str) -> Value {
    serde_json::from_str(body).unwrap_or(Value::Null)
}

fn num(v: &Value, digits: usize) -> String {
    v.as_f64().map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let joined: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(joined.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn render_devices(body: &str) -> String {
    let v = parse(body);
    let rows: Vec<Vec<String>> = v
        .as_array()
        .map(|a| a.as_slice())
        .unwrap_or_default()
        .iter()
        .map(|d| {
            let f = &d["fomac"];
            vec![
                text(&d["properties"]["device_id"]),
                text(&d["properties"]["num_qubits"]),
                if f["healthy"] == json!(true) { "yes".into() } else { "no".into() },
                text(&d["queue_length"]),
                num(&d["est_wait_s"], 1),
                num(&f["avg_1q_fidelity"], 4),
                num(&f["avg_2q_fidelity"], 4),
                num(&f["avg_readout_fidelity"], 4),
                num(&f["temperature_mK"], 1),
            ]
        })
        .collect();
    table(&["DEVICE", "QUBITS", "HEALTHY", "QUEUE", "WAIT_S", "F1Q", "F2Q", "FREADOUT", "TEMP_MK"], &rows)
}

pub fn render_job(body: &str) -> String {
    let v = parse(body);
    let mut out = String::new();
    for key in ["job_id", "state", "device_id", "shots", "priority", "seed"] {
        let _ = writeln!(out, "{key:<9} {}", text(&v[key]));
    }
    if !v["error"].is_null() {
        let _ = writeln!(out, "{:<9} {}", "error", text(&v["error"]));
    }
    for t in v["transitions"].as_array().map(|a| a.as_slice()).unwrap_or_default() {
        let _ = writeln!(out, "  {:<10} {}", text(&t["state"]), num(&t["at"], 3));
    }
    out
}

pub fn render_result(body: &str) -> String {
    let v = parse(body);
    let meta = &v["metadata"];
    let mut out = format!(
        "job {} on {} ({} shots, seed {})\n",
        text(&v["job_id"]),
        text(&meta["device_id"]),
        text(&meta["shots"]),
        text(&meta["seed"])
    );
    let counts = v["counts"]["counts"].as_object().cloned().unwrap_or_default();
    let hist = &v["histogram"];
    let mitigated = &v["mitigated_histogram"];
    let mut keys: Vec<&String> = counts.keys().collect();
    if let Some(m) = mitigated.as_object() {
        keys.extend(m.keys().filter(|k| !counts.contains_key(*k)));
    }
    keys.sort();
    let rows: Vec<Vec<String>> = keys
        .iter()
        .map(|k| {
            let mut row = vec![k.to_string(), counts.get(*k).map(text).unwrap_or_else(|| "0".into()), num(&hist[k.as_str()], 4)];
            if !mitigated.is_null() {
                row.push(num(&mitigated[k.as_str()], 4));
            }
            row
        })
        .collect();
    let header: &[&str] = if mitigated.is_null() { &["OUTCOME", "COUNT", "FREQ"] } else { &["OUTCOME", "COUNT", "FREQ", "MITIGATED"] };
    out.push_str(&table(header, &rows));
    if let Some(e) = meta["mitigation_error"].as_str() {
        let _ = writeln!(out, "mitigation failed: {e}");
    }
    out
}

/// Terminal state named in a job body, if any.
pub fn terminal_state(body: &str) -> Option<String> {
    let state = parse(body)["state"].as_str()?.to_string();
    matches!(state.as_str(), "DONE" | "FAILED" | "CANCELLED").then_some(state)
}
