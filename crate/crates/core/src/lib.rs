//! Core of a desk-scale quantum software stack: circuit IR, device interface,
//! simulated backends, figures of merit, compiler, scheduler and the job
//! orchestration pipeline.

pub mod backends;
pub mod circuit;
pub mod clock;
pub mod compiler;
pub mod fomac;
pub mod orchestrator;
pub mod postprocess;
pub mod qdmi;
pub mod scheduler;

pub use circuit::{Gate, GateOp, Layout, Level, QuantumCircuit};
pub use clock::{Clock, ManualClock, SystemClock};
pub use qdmi::{Counts, DeviceProperties, JobId, JobState, Qdmi, QdmiConfig, SessionId, TelemetrySnapshot};
