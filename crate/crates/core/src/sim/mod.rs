//! Deterministic discrete-event simulator: a single GPU batch executor, a
//! pool of CPU lanes, and a parametric latency model in place of real
//! model inference.

mod engine;
mod profile;

pub use engine::{
    exec_latency_batch, exec_latency_single, run_sim, utilization, SimConfig, SimError,
    SimOutcome, TaskLogRow,
};
pub use profile::{ModelProfile, ProfileError};
