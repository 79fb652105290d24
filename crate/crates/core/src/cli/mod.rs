//! Command-line wiring: configuration loading with flag overrides, the
//! scoring pipeline that turns trace records into simulator tasks, and the
//! profile / run / compare / report commands.

mod commands;

pub use commands::{
    cmd_compare, cmd_profile, cmd_report, cmd_run, cmd_synth_trace, run_cli, Cli,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{ProfileArtifact, ProfileScorer, UncertaintyScore};
use crate::sched::{assign_deadline, SchedulerConfig, Task};
use crate::sim::ModelProfile;
use crate::textfeat::{tokenize, FeatureVector, RuleGen};
use crate::util::fingerprint;
use crate::workload::{ArrivalPlan, BetaSchedule, TraceRecord};

/// Exit code 2: configuration problems. Exit code 3: runtime failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub(crate) fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

pub(crate) fn runtime_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSection {
    /// Arrival rates in queries per minute: "60", "10:150", or "10,40,150".
    #[serde(default = "default_beta")]
    pub beta_schedule: String,
    /// Wait interval in seconds.
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default)]
    pub malicious_ratio: f64,
    #[serde(default = "default_inflation")]
    pub malicious_inflation: f64,
    /// Which variance subset to run: all, small, normal, or large.
    #[serde(default = "default_variance")]
    pub variance_subset: String,
    /// Deadline tightness: "tight" (1x), "loose" (2x), or a multiplier.
    #[serde(default = "default_tightness")]
    pub tightness: String,
    /// Horizon = last arrival + this slack, seconds.
    #[serde(default = "default_slack")]
    pub horizon_slack: f64,
    /// Constant per-task scheduling cost in seconds.
    #[serde(default)]
    pub decision_overhead: f64,
}

fn default_beta() -> String {
    "60".into()
}
fn default_xi() -> f64 {
    2.0
}
fn default_inflation() -> f64 {
    3.0
}
fn default_variance() -> String {
    "all".into()
}
fn default_tightness() -> String {
    "tight".into()
}
fn default_slack() -> f64 {
    600.0
}

impl Default for WorkloadSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

/// Where uncertainty scores come from: a trained profile artifact or the
/// single-rule heuristic (dominant rule score, falling back to input
/// length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSection {
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default)]
    pub artifact: Option<PathBuf>,
}

fn default_source() -> String {
    "single_rule".into()
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            source: default_source(),
            artifact: None,
        }
    }
}

/// One run, fully described. Every output file embeds the resolved copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trace: PathBuf,
    /// Reference profile name (dialogpt, blenderbot, bart, t5) or a path
    /// to a profile JSON.
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
}

fn default_profile() -> String {
    "dialogpt".into()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// Flag overrides; each one maps onto a documented config key.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub trace: Option<PathBuf>,
    pub profile: Option<String>,
    pub policy: Option<String>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub beta_schedule: Option<String>,
    pub xi: Option<f64>,
    pub malicious_ratio: Option<f64>,
    pub variance: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub estimator_artifact: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| config_err(format!("cannot parse config {}: {e}", path.display())))?;
        config.apply(overrides)?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<(), CliError> {
        let o = overrides.clone();
        if let Some(v) = o.trace {
            self.trace = v;
        }
        if let Some(v) = o.profile {
            self.profile = v;
        }
        if let Some(v) = o.policy {
            self.scheduler.policy = crate::sched::Policy::parse(&v).ok_or_else(|| {
                config_err(format!("unknown policy `{v}` (known: fifo, edf, luf, muf, up)"))
            })?;
        }
        if let Some(v) = o.alpha {
            self.scheduler.alpha = v;
        }
        if let Some(v) = o.lambda {
            self.scheduler.lambda = v;
        }
        if let Some(v) = o.b {
            self.scheduler.b = v;
        }
        if let Some(v) = o.k {
            self.scheduler.k = v;
        }
        if let Some(v) = o.beta_schedule {
            self.workload.beta_schedule = v;
        }
        if let Some(v) = o.xi {
            self.workload.xi = v;
        }
        if let Some(v) = o.malicious_ratio {
            self.workload.malicious_ratio = v;
        }
        if let Some(v) = o.variance {
            self.workload.variance_subset = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.out {
            self.out_dir = v;
        }
        if let Some(v) = o.estimator_artifact {
            self.estimator.source = "artifact".into();
            self.estimator.artifact = Some(v);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.trace.exists() {
            return Err(config_err(format!(
                "trace file does not exist: {}",
                self.trace.display()
            )));
        }
        self.scheduler.validate().map_err(config_err)?;
        if BetaSchedule::parse(&self.workload.beta_schedule).is_none() {
            return Err(config_err(format!(
                "cannot parse beta schedule `{}`",
                self.workload.beta_schedule
            )));
        }
        if !(0.0..=1.0).contains(&self.workload.malicious_ratio) {
            return Err(config_err("malicious_ratio must lie in [0, 1]"));
        }
        if self.workload.malicious_inflation <= 0.0 {
            return Err(config_err("malicious_inflation must be positive"));
        }
        if !matches!(
            self.workload.variance_subset.as_str(),
            "all" | "small" | "normal" | "large"
        ) {
            return Err(config_err(format!(
                "variance subset must be all/small/normal/large, got `{}`",
                self.workload.variance_subset
            )));
        }
        self.tightness()?;
        if self.workload.xi <= 0.0 {
            return Err(config_err("xi must be positive"));
        }
        match self.estimator.source.as_str() {
            "single_rule" => {}
            "artifact" => {
                let path = self.estimator.artifact.as_ref().ok_or_else(|| {
                    config_err("estimator.source = artifact needs estimator.artifact")
                })?;
                if !path.exists() {
                    return Err(config_err(format!(
                        "estimator artifact does not exist: {}",
                        path.display()
                    )));
                }
            }
            other => {
                return Err(config_err(format!(
                    "estimator source must be single_rule or artifact, got `{other}`"
                )))
            }
        }
        Ok(())
    }

    pub fn tightness(&self) -> Result<f64, CliError> {
        match self.workload.tightness.as_str() {
            "tight" => Ok(1.0),
            "loose" => Ok(2.0),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|t| *t > 0.0)
                .ok_or_else(|| config_err(format!("bad tightness `{other}`"))),
        }
    }

    pub fn beta_schedule(&self) -> BetaSchedule {
        BetaSchedule::parse(&self.workload.beta_schedule).expect("validated at load")
    }

    pub fn load_model_profile(&self) -> Result<ModelProfile, CliError> {
        let named = ModelProfile::reference(&self.profile);
        match named {
            Ok(profile) => Ok(profile),
            Err(_) if Path::new(&self.profile).exists() => {
                ModelProfile::load(Path::new(&self.profile)).map_err(config_err)
            }
            Err(e) => Err(config_err(format!(
                "profile `{}` is neither a reference name nor a file: {e}",
                self.profile
            ))),
        }
    }

    /// Fingerprint of the fully resolved config (embedded in reports).
    pub fn fingerprint(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        fingerprint(canonical.as_bytes())
    }
}

/// A trace record with its rule features and frozen uncertainty estimate.
#[derive(Debug, Clone)]
pub struct ScoredRecord {
    pub record: TraceRecord,
    pub features: FeatureVector,
    pub input_len: usize,
    pub uncertainty: UncertaintyScore,
}

pub enum ScoreSource {
    /// Dominant rule score with input-length fallback, normalized by the
    /// model profile's uncertainty ceiling.
    SingleRule,
    Artifact(Box<ProfileScorer>),
}

impl ScoreSource {
    pub fn from_config(cfg: &EstimatorSection) -> Result<ScoreSource, CliError> {
        match cfg.source.as_str() {
            "single_rule" => Ok(ScoreSource::SingleRule),
            "artifact" => {
                let path = cfg
                    .artifact
                    .as_ref()
                    .ok_or_else(|| config_err("missing estimator artifact path"))?;
                let artifact = ProfileArtifact::load(path).map_err(runtime_err)?;
                Ok(ScoreSource::Artifact(Box::new(ProfileScorer::new(&artifact))))
            }
            other => Err(config_err(format!("unknown estimator source `{other}`"))),
        }
    }
}

/// Tokenizes and scores every record. Records that tokenize to nothing are
/// rejected here, before they can reach the scheduler.
pub fn score_records(
    records: &[TraceRecord],
    source: &ScoreSource,
    rulegen: &RuleGen,
    u_max_fallback: f64,
) -> Result<Vec<ScoredRecord>, CliError> {
    records
        .iter()
        .map(|record| {
            let tokens = tokenize(&record.text, rulegen.lexicon());
            if tokens.is_empty() {
                return Err(runtime_err(format!(
                    "record {} tokenizes to nothing and cannot be scheduled",
                    record.id
                )));
            }
            let features = rulegen.feature_vector_of_tokens(&tokens);
            let uncertainty = match source {
                ScoreSource::SingleRule => {
                    let value = if features.is_all_zero() {
                        tokens.len() as f64
                    } else {
                        features.max_score()
                    };
                    UncertaintyScore::from_value(value, u_max_fallback)
                }
                ScoreSource::Artifact(scorer) => scorer.score(&features, tokens.len()),
            };
            Ok(ScoredRecord {
                record: record.clone(),
                features,
                input_len: tokens.len(),
                uncertainty,
            })
        })
        .collect()
}

/// Maps scored records onto an arrival plan, assigning deadlines by the
/// profile rule (or the record's own offset) at the given tightness.
pub fn build_tasks(
    scored: &[ScoredRecord],
    plan: &ArrivalPlan,
    model: &ModelProfile,
    tightness: f64,
) -> Vec<Task> {
    assert_eq!(scored.len(), plan.arrivals.len());
    plan.arrivals
        .iter()
        .zip(&plan.record_order)
        .map(|(&arrival, &idx)| {
            let sr = &scored[idx];
            let deadline = assign_deadline(
                arrival,
                sr.input_len,
                model,
                tightness,
                sr.record.deadline,
            );
            Task::new(
                sr.record.id,
                sr.record.text.clone(),
                arrival,
                deadline,
                sr.input_len,
                sr.uncertainty,
                sr.record.out_len,
            )
        })
        .collect()
}

/// Fingerprint of the workload family a run draws from: the source
/// records plus every knob that shapes them (arrival schedule, wait
/// interval, deadline rule, malicious injection, subset choice). The seed
/// is deliberately excluded: runs of different seeds over the same family
/// are comparable, and each report records its seed separately.
pub fn workload_fingerprint(
    records: &[TraceRecord],
    schedule: &BetaSchedule,
    xi: f64,
    tightness: f64,
    profile_name: &str,
    malicious_ratio: f64,
    malicious_inflation: f64,
    variance_subset: &str,
) -> String {
    let payload = format!(
        "{}|{schedule}|{xi}|{tightness}|{profile_name}|{malicious_ratio}|{malicious_inflation}|{variance_subset}",
        crate::workload::trace_to_jsonl(records)
    );
    fingerprint(payload.as_bytes())
}
