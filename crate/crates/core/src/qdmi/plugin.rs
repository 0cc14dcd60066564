use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use thiserror::Error;

use super::types::{Counts, DeviceProperties, TelemetrySnapshot};

/// Cooperative cancellation flag shared between the registry and a running
/// execution.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecutionError {
    #[error("program rejected: {0}")]
    Validation(String),
    #[error("execution cancelled")]
    Cancelled,
    #[error("device failure: {0}")]
    Device(String),
}

/// The hardware-facing side of the device interface.
///
/// The registry guarantees at most one `execute` call per device at a time;
/// `telemetry` may be called concurrently with a running execution.
pub trait DevicePlugin: Send + Sync {
    fn static_properties(&self) -> DeviceProperties;

    fn telemetry(&self, now: f64) -> TelemetrySnapshot;

    /// Runs a low-level program and returns its measurement counts.
    /// Implementations should poll `cancel` and return
    /// [`ExecutionError::Cancelled`] once it is set.
    fn execute(&self, program: &str, shots: u64, seed: u64, cancel: &CancelToken) -> Result<Counts, ExecutionError>;
}
