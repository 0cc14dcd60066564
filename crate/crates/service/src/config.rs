//! Service configuration file (JSON). Every key is optional.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use ipnet::IpNet;
use ministack_core::compiler::DEFAULT_SELECTOR;
use ministack_core::fomac::FomacLimits;
use ministack_core::qdmi::QdmiConfig;
use ministack_core::scheduler::SchedulingPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_GATEWAY_HEADER: &str = "x-ministack-gateway";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    /// Source networks whose submissions count as local.
    pub local_cidrs: Vec<IpNet>,
    /// A request carrying this header counts as local; `null` disables it.
    pub gateway_header: Option<String>,
    /// Token allow-list file, one token per line.
    pub allow_list_path: Option<PathBuf>,
    /// Tokens accepted in addition to the allow-list file.
    pub tokens: Vec<String>,
    pub fomac: FomacLimits,
    pub policy: SchedulingPolicy,
    pub max_shots: u64,
    pub pass_selector: String,
    /// Append-only job log; jobs are kept in memory only when unset.
    pub job_log: Option<PathBuf>,
    /// Directory of dashboard assets served under `/`.
    pub static_dir: Option<PathBuf>,
    /// Whether the simulators apply readout noise from their telemetry.
    pub readout_noise: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            local_cidrs: vec!["127.0.0.0/8".parse().unwrap(), "::1/128".parse().unwrap()],
            gateway_header: Some(DEFAULT_GATEWAY_HEADER.into()),
            allow_list_path: None,
            tokens: Vec::new(),
            fomac: FomacLimits::default(),
            policy: SchedulingPolicy::default(),
            max_shots: QdmiConfig::default().max_shots,
            pass_selector: DEFAULT_SELECTOR.into(),
            job_log: None,
            static_dir: None,
            readout_noise: true,
        }
    }
}

impl ServiceConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg: ServiceConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.allow_list_path, &mut cfg.job_log, &mut cfg.static_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_shots == 0 {
            return Err(ConfigError::Invalid("max_shots must be at least 1".into()));
        }
        if self.gateway_header.as_deref().is_some_and(|h| axum::http::HeaderName::try_from(h).is_err()) {
            return Err(ConfigError::Invalid("gateway_header is not a valid header name".into()));
        }
        Ok(())
    }

    /// Inline tokens plus the allow-list file's contents.
    pub fn allow_list(&self) -> Result<BTreeSet<String>, ConfigError> {
        let mut tokens: BTreeSet<String> = self.tokens.iter().cloned().collect();
        if let Some(path) = &self.allow_list_path {
            tokens.extend(
                QdmiConfig::load_allow_list(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?,
            );
        }
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: ServiceConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        assert_eq!(cfg.max_shots, 100_000);
        assert_eq!(cfg.fomac.max_temperature_mk, 60.0);
    }

    #[test]
    fn load_resolves_relative_paths() {
        let dir = std::env::temp_dir().join(format!("ministack-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("tokens.txt"), "# ops\nalpha\n\nbeta\n").unwrap();
        let body = r#"{"listen": "0.0.0.0:9000", "local_cidrs": ["10.0.0.0/8"], "allow_list_path": "tokens.txt",
            "tokens": ["gamma"], "fomac": {"max_temperature_mk": 40}, "policy": {"w_esp": 0.6, "w_wait": 0.2, "w_exec": 0.2},
            "max_shots": 500, "job_log": "jobs.jsonl"}"#;
        std::fs::write(dir.join("service.json"), body).unwrap();
        let cfg = ServiceConfig::load(&dir.join("service.json")).unwrap();
        assert_eq!(cfg.job_log.as_deref(), Some(dir.join("jobs.jsonl").as_path()));
        assert_eq!(cfg.fomac.max_temperature_mk, 40.0);
        assert_eq!(cfg.fomac.max_calibration_age_s, 86_400.0);
        assert_eq!(cfg.allow_list().unwrap(), BTreeSet::from(["alpha".into(), "beta".into(), "gamma".into()]));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn bad_values_rejected() {
        let bad = |s: &str| serde_json::from_str::<ServiceConfig>(s).map_err(|e| e.to_string()).and_then(|c| c.validate().map_err(|e| e.to_string()));
        assert!(bad(r#"{"max_shots": 0}"#).is_err());
        assert!(bad(r#"{"policy": {"w_esp": -1}}"#).is_err());
        assert!(bad(r#"{"local_cidrs": ["nonsense"]}"#).is_err());
        assert!(bad(r#"{"unknown_key": 1}"#).is_err());
        assert!(bad(r#"{"gateway_header": "bad header"}"#).is_err());
    }
}
