//! Per-model calibration bundles. A profile stands in for one real model:
//! its latency coefficients, deadline coefficient, batch capacity, offload
//! threshold, and CPU slowdown.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot decode profile: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("unknown reference profile `{0}` (known: dialogpt, blenderbot, bart, t5)")]
    UnknownReference(String),
    #[error("invalid profile `{name}`: {msg}")]
    Invalid { name: String, msg: String },
}

/// Calibration constants for one served model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    /// Seconds of GPU decode time per output token.
    pub output_token_latency: f64,
    /// Seconds of deadline budget granted per input token.
    pub deadline_per_input_token: f64,
    /// Optimal GPU batch size for this model.
    pub batch_capacity: usize,
    /// Uncertainty score above which a task is routed to CPU.
    pub offload_threshold: f64,
    /// Ceiling used to normalize uncertainty scores into [0, 1].
    pub uncertainty_ceiling: f64,
    /// Fixed per-inference GPU latency independent of output length.
    pub base_latency_gpu: f64,
    /// Extra latency for assembling and launching one GPU batch.
    pub batch_setup: f64,
    /// CPU execution takes this multiple of the GPU single-task latency.
    pub cpu_slowdown: f64,
    /// Number of CPU lanes executing offloaded tasks, one task each.
    #[serde(default = "default_cpu_lanes")]
    pub cpu_lanes: usize,
}

fn default_cpu_lanes() -> usize {
    4
}

const REFERENCE_PROFILES: [(&str, &str); 4] = [
    ("dialogpt", include_str!("../../data/profiles/dialogpt.json")),
    ("blenderbot", include_str!("../../data/profiles/blenderbot.json")),
    ("bart", include_str!("../../data/profiles/bart.json")),
    ("t5", include_str!("../../data/profiles/t5.json")),
];

impl ModelProfile {
    /// Loads one of the shipped reference profiles by name.
    pub fn reference(name: &str) -> Result<ModelProfile, ProfileError> {
        let entry = REFERENCE_PROFILES
            .iter()
            .find(|(n, _)| *n == name.to_lowercase())
            .ok_or_else(|| ProfileError::UnknownReference(name.to_string()))?;
        let profile: ModelProfile = serde_json::from_str(entry.1)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn reference_names() -> Vec<&'static str> {
        REFERENCE_PROFILES.iter().map(|(n, _)| *n).collect()
    }

    pub fn load(path: &Path) -> Result<ModelProfile, ProfileError> {
        let json = std::fs::read_to_string(path)?;
        let profile: ModelProfile = serde_json::from_str(&json)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let fail = |msg: &str| {
            Err(ProfileError::Invalid {
                name: self.name.clone(),
                msg: msg.to_string(),
            })
        };
        if self.output_token_latency <= 0.0 || self.deadline_per_input_token <= 0.0 {
            return fail("latency coefficients must be positive");
        }
        if self.batch_capacity < 1 {
            return fail("batch capacity must be at least 1");
        }
        if self.offload_threshold <= 0.0 || self.uncertainty_ceiling <= 0.0 {
            return fail("thresholds must be positive");
        }
        if self.base_latency_gpu <= 0.0 || self.batch_setup < 0.0 {
            return fail("base latency must be positive, batch setup non-negative");
        }
        if self.cpu_slowdown < 1.0 {
            return fail("cpu slowdown must be >= 1");
        }
        if self.cpu_lanes < 1 {
            return fail("need at least one cpu lane");
        }
        Ok(())
    }
}
