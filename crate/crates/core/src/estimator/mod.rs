//! Output-length estimation: the fitted weighted rule, the lightweight MLP
//! regressor, the nearest-rank quantile used for the offload threshold, and
//! the offline profiling step that bundles them into a loadable artifact.

mod linreg;
mod mlp;
mod profile;

pub use linreg::{fit_weighted_rule, WeightedRule};
pub use mlp::{mlp_train, AdamConfig, MlpRegressor, Optimizer, TrainConfig, TrainReport};
pub use profile::{
    profile_offline, OfflineProfile, ProfileArtifact, ProfileConfig, ProfileScorer,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textfeat::FeatureVector;
use crate::util::nearest_rank_index;

/// Paper-default hidden layer sizes of the lightweight regressor.
pub const DEFAULT_HIDDEN_DIMS: [usize; 4] = [100, 200, 200, 100];

#[derive(Debug, Error)]
pub enum EstimatorError {
    /// The damped normal matrix is numerically singular, or the design
    /// violates the fitting preconditions. Signals an unusable
    /// lexicon/dataset combination.
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
    /// Training loss left the finite range; targets are unscaled or the
    /// learning rate is too hot.
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("cannot take a quantile of an empty score set")]
    EmptyScores,
    #[error("profile content hash mismatch: stored {stored}, computed {computed}")]
    HashMismatch { stored: String, computed: String },
    #[error("profile i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("profile decode error: {0}")]
    Decode(#[from] serde_json::Error),
}

/// One supervised example: rule features of an input plus the observed
/// output length (in tokens) a model produced for it. `target_len` >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub features: FeatureVector,
    pub input_len: usize,
    pub target_len: u32,
}

/// Predicted output length for one input, raw and normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    /// Predicted output length in tokens; always >= 0.
    pub value: f64,
    /// `min(1, value / u_max)` for the profile's recorded ceiling.
    pub normalized: f64,
}

impl UncertaintyScore {
    pub fn from_value(value: f64, u_max: f64) -> UncertaintyScore {
        assert!(u_max > 0.0, "u_max must be positive");
        let value = value.max(0.0);
        UncertaintyScore {
            value,
            normalized: (value / u_max).min(1.0),
        }
    }
}

/// Nearest-rank quantile: sort ascending and return the element at index
/// ceil(k*n) - 1. No interpolation, so the result is always an observed
/// score and an independent sort oracle can check it exactly.
pub fn quantile_threshold(scores: &[f64], k: f64) -> Result<f64, EstimatorError> {
    assert!(k > 0.0 && k < 1.0, "quantile level must be in (0, 1)");
    if scores.is_empty() {
        return Err(EstimatorError::EmptyScores);
    }
    debug_assert!(scores.iter().all(|s| s.is_finite()));
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    Ok(sorted[nearest_rank_index(k, sorted.len())])
}

/// Assembles the regressor input vector for one record: the six rule
/// scores, optionally followed by the raw input length when the profile
/// was configured with the extra feature (off by default).
pub fn model_inputs(
    features: &FeatureVector,
    input_len: usize,
    include_input_len: bool,
) -> Vec<f64> {
    let mut inputs = features.scores().to_vec();
    if include_input_len {
        inputs.push(input_len as f64);
    }
    inputs
}
