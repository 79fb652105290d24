//! Offline profiling: train the regressor, freeze the normalization
//! ceiling and offload threshold, and persist everything as one
//! self-describing, hash-checked JSON artifact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{mlp_train, Layer, MlpRegressor, TrainConfig, TrainReport};
use super::{model_inputs, quantile_threshold, EstimatorError, TrainRecord, UncertaintyScore};
use crate::textfeat::{FeatureVector, FEATURE_COUNT};
use crate::util::fingerprint;

/// Minimum normalization ceiling; keeps `normalized` well-defined even for
/// a degenerate model whose every prediction clamps to zero.
const U_MAX_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Layer sizes, input to output. The default is the paper setup:
    /// six features, hidden [100, 200, 200, 100], scalar output.
    pub dims: Vec<usize>,
    pub train: TrainConfig,
    /// Adds the raw input length as a seventh regressor feature. Off by
    /// default: the feature vector proper stays the six rule scores.
    pub include_input_len: bool,
    /// Rule weights the feature vectors were produced with.
    pub scorer_weights: [f64; FEATURE_COUNT],
}

impl Default for ProfileConfig {
    fn default() -> Self {
        let mut dims = vec![FEATURE_COUNT];
        dims.extend_from_slice(&super::DEFAULT_HIDDEN_DIMS);
        dims.push(1);
        ProfileConfig {
            dims,
            train: TrainConfig::default(),
            include_input_len: false,
            scorer_weights: [1.0; FEATURE_COUNT],
        }
    }
}

/// Result of offline profiling, before serialization.
#[derive(Debug, Clone)]
pub struct OfflineProfile {
    pub model: MlpRegressor,
    pub tau: f64,
    pub u_max: f64,
    pub k: f64,
    pub include_input_len: bool,
    pub scorer_weights: [f64; FEATURE_COUNT],
    pub report: TrainReport,
}

/// Trains the regressor on the records, then freezes `u_max` as the
/// maximum prediction over the training set and `tau` as the nearest-rank
/// `k`-quantile of those same predictions.
pub fn profile_offline(
    records: &[TrainRecord],
    k: f64,
    cfg: &ProfileConfig,
) -> Result<OfflineProfile, EstimatorError> {
    assert!(!records.is_empty(), "profiling needs a non-empty training set");
    let expected_input = FEATURE_COUNT + usize::from(cfg.include_input_len);
    assert_eq!(
        cfg.dims[0], expected_input,
        "profile dims[0] must match the feature assembly"
    );

    let model = MlpRegressor::new(&cfg.dims, cfg.train.seed);
    let (model, report) = mlp_train(model, records, &cfg.train)?;

    let predictions: Vec<f64> = records
        .iter()
        .map(|r| {
            model.predict_value(&model_inputs(&r.features, r.input_len, cfg.include_input_len))
        })
        .collect();
    let u_max = predictions.iter().cloned().fold(0.0, f64::max).max(U_MAX_FLOOR);
    let tau = quantile_threshold(&predictions, k)?;

    Ok(OfflineProfile {
        model,
        tau,
        u_max,
        k,
        include_input_len: cfg.include_input_len,
        scorer_weights: cfg.scorer_weights,
        report,
    })
}

impl OfflineProfile {
    pub fn to_artifact(&self, lexicon_version: &str) -> ProfileArtifact {
        ProfileArtifact::new(ProfileBody {
            format: ProfileBody::FORMAT,
            lexicon_version: lexicon_version.to_string(),
            scorer_weights: self.scorer_weights,
            include_input_len: self.include_input_len,
            dims: self.model.dims().to_vec(),
            layers: self.model.layers().to_vec(),
            seed: self.model.seed(),
            u_max: self.u_max,
            tau: self.tau,
            k: self.k,
        })
    }
}

/// Everything the online phase needs to score inputs, minus the hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBody {
    pub format: u32,
    pub lexicon_version: String,
    pub scorer_weights: [f64; FEATURE_COUNT],
    pub include_input_len: bool,
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub u_max: f64,
    pub tau: f64,
    pub k: f64,
}

impl ProfileBody {
    const FORMAT: u32 = 1;
}

/// A profile plus the content hash of its canonical JSON encoding. The
/// loader recomputes and compares the hash, so a corrupted or hand-edited
/// artifact is rejected instead of silently mis-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileArtifact {
    pub profile: ProfileBody,
    pub content_hash: String,
}

impl ProfileArtifact {
    pub fn new(profile: ProfileBody) -> ProfileArtifact {
        let content_hash = Self::hash_of(&profile);
        ProfileArtifact {
            profile,
            content_hash,
        }
    }

    fn hash_of(body: &ProfileBody) -> String {
        let canonical = serde_json::to_string(body).expect("profile body serializes");
        fingerprint(canonical.as_bytes())
    }

    pub fn model(&self) -> MlpRegressor {
        MlpRegressor::from_layers(
            self.profile.dims.clone(),
            self.profile.layers.clone(),
            self.profile.seed,
        )
    }

    /// Scores one input with the stored model and normalization ceiling.
    pub fn score(&self, features: &FeatureVector, input_len: usize) -> UncertaintyScore {
        let inputs = model_inputs(features, input_len, self.profile.include_input_len);
        self.model().predict(&inputs, self.profile.u_max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile artifact serializes")
    }

    pub fn from_json(json: &str) -> Result<ProfileArtifact, EstimatorError> {
        let artifact: ProfileArtifact = serde_json::from_str(json)?;
        let computed = Self::hash_of(&artifact.profile);
        if computed != artifact.content_hash {
            return Err(EstimatorError::HashMismatch {
                stored: artifact.content_hash,
                computed,
            });
        }
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<(), EstimatorError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ProfileArtifact, EstimatorError> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json(&json)
    }
}

/// Stateful scorer: one loaded artifact plus a cached model instance, so
/// repeated scoring does not rebuild layers.
#[derive(Debug, Clone)]
pub struct ProfileScorer {
    model: MlpRegressor,
    include_input_len: bool,
    u_max: f64,
    tau: f64,
}

impl ProfileScorer {
    pub fn new(artifact: &ProfileArtifact) -> ProfileScorer {
        ProfileScorer {
            model: artifact.model(),
            include_input_len: artifact.profile.include_input_len,
            u_max: artifact.profile.u_max,
            tau: artifact.profile.tau,
        }
    }

    pub fn score(&self, features: &FeatureVector, input_len: usize) -> UncertaintyScore {
        let inputs = model_inputs(features, input_len, self.include_input_len);
        self.model.predict(&inputs, self.u_max)
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}
