//! HTTP front end for the orchestration pipeline: sessions, jobs, results,
//! device data, and the dashboard's static assets.

pub mod api;
pub mod config;
pub mod joblog;
pub mod origin;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use ministack_core::backends::builtin_devices;
use ministack_core::clock::{Clock, SystemClock};
use ministack_core::compiler::SelectorRegistry;
use ministack_core::orchestrator::{Orchestrator, OrchestratorConfig};
use ministack_core::qdmi::{DevicePlugin, Qdmi, QdmiConfig};
use tokio::net::TcpListener;

pub use api::router;
pub use config::{ConfigError, ServiceConfig};
pub use joblog::JobLog;
pub use origin::OriginRules;

#[derive(Clone)]
pub struct AppState {
    pub orchestrator: Orchestrator,
    pub origin: Arc<OriginRules>,
    pub static_dir: Option<PathBuf>,
}

/// Wires the built-in simulators, the orchestrator and (if configured) the
/// job log according to `config`.
pub fn build(config: &ServiceConfig, clock: Arc<dyn Clock>) -> Result<AppState, ConfigError> {
    let devices = builtin_devices(clock.clone(), config.readout_noise)
        .into_iter()
        .map(|d| d as Arc<dyn DevicePlugin>)
        .collect();
    build_with(config, clock, devices)
}

/// Like [`build`] with an explicit set of device plugins.
pub fn build_with(config: &ServiceConfig, clock: Arc<dyn Clock>, devices: Vec<Arc<dyn DevicePlugin>>) -> Result<AppState, ConfigError> {
    config.validate()?;
    let qdmi_config = QdmiConfig { allow_list: config.allow_list()?, max_shots: config.max_shots };
    let qdmi = Qdmi::new(qdmi_config, clock);
    for device in devices {
        qdmi.register_device(device).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    let orch_config = OrchestratorConfig {
        limits: config.fomac,
        default_policy: config.policy.clone(),
        pass_selector: config.pass_selector.clone(),
    };
    let registry = SelectorRegistry::new();
    if !registry.names().contains(&config.pass_selector) {
        return Err(ConfigError::Invalid(format!("unknown pass selector `{}`", config.pass_selector)));
    }
    let orchestrator = Orchestrator::new(qdmi, orch_config, registry);
    if let Some(path) = &config.job_log {
        let (log, replay) = JobLog::open(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
        log::info!("replaying {} jobs from {}", replay.records.len(), path.display());
        log.attach(&orchestrator, replay);
    }
    Ok(AppState {
        orchestrator,
        origin: Arc::new(OriginRules::new(config.local_cidrs.clone(), config.gateway_header.as_deref())),
        static_dir: config.static_dir.clone(),
    })
}

/// Serves the API on an already bound listener until `shutdown` resolves.
pub async fn run(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(state).into_make_service_with_connect_info::<SocketAddr>();
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// Builds the service from `config` and serves it on the configured address.
pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let state = build(&config, Arc::new(SystemClock))?;
    let listener = TcpListener::bind(config.listen).await?;
    log::info!("listening on {}", listener.local_addr()?);
    run(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    log::info!("shut down");
    Ok(())
}
