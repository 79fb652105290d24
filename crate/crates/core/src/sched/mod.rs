//! The online scheduler: task model, priority policies, dynamic batch
//! consolidation, and the CPU offload rule.
//!
//! Priorities are static per task (they depend only on arrival, deadline,
//! and the frozen uncertainty estimate), so every policy reduces to a
//! deterministic ordering key plus the staging machinery in [`engine`].

mod engine;

pub use engine::{BatchPlan, Scheduler, StepContext};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::UncertaintyScore;
use crate::sim::ModelProfile;

/// Slack at or below this many seconds puts a task in the overdue tier.
pub const SLACK_EPSILON: f64 = 1e-6;

/// Effective priority offset of the overdue tier; any overdue task outranks
/// every normal-tier task. Logged priorities at or above this value are
/// overdue-tier entries.
pub const OVERDUE_TIER_BASE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// First in, first out: priority is the negated arrival time.
    Fifo,
    /// Earliest deadline first.
    Edf,
    /// Least uncertainty first.
    Luf,
    /// Most uncertainty first.
    Muf,
    /// Uncertainty-aware prioritization with consolidation and offloading.
    Up,
}

impl Policy {
    pub fn parse(s: &str) -> Option<Policy> {
        Some(match s.to_lowercase().as_str() {
            "fifo" => Policy::Fifo,
            "edf" => Policy::Edf,
            "luf" => Policy::Luf,
            "muf" => Policy::Muf,
            "up" | "eudf" => Policy::Up,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Fifo => "fifo",
            Policy::Edf => "edf",
            Policy::Luf => "luf",
            Policy::Muf => "muf",
            Policy::Up => "up",
        }
    }
}

/// Which uncertainty term feeds the priority numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumeratorMode {
    /// `1 - alpha * normalized` (bounded; the default).
    #[default]
    Normalized,
    /// `1 - alpha * value` (raw token estimate; for sensitivity runs).
    Raw,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scheduler config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub policy: Policy,
    /// Weight of the uncertainty term in the priority numerator.
    pub alpha: f64,
    /// Maximum allowed ratio between adjacent uncertainties in one batch.
    pub lambda: f64,
    /// Staging multiple: consolidation considers floor(b * capacity) tasks.
    pub b: f64,
    /// Quantile level behind the offload threshold.
    pub k: f64,
    pub numerator_mode: NumeratorMode,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            policy: Policy::Up,
            alpha: 1.0,
            lambda: 1.5,
            b: 1.6,
            k: 0.9,
            numerator_mode: NumeratorMode::Normalized,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ConfigError::Invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lambda >= 1.0 && self.lambda.is_finite()) {
            return Err(ConfigError::Invalid(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        if !(self.b >= 1.0 && self.b.is_finite()) {
            return Err(ConfigError::Invalid(format!("b must be >= 1, got {}", self.b)));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(ConfigError::Invalid(format!("k must be in (0, 1), got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutorKind {
    Gpu,
    Cpu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Queued,
    BatchedGpu,
    OffloadedCpu,
    Done,
}

/// Ground-truth output length, readable only outside scheduler decisions.
///
/// Priority, consolidation, and offload code runs inside a decision scope;
/// revealing the value there trips a debug assertion, which keeps the
/// scheduler honest about only using estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiddenOutputLen(u32);

thread_local! {
    static IN_DECISION: std::cell::Cell<bool> = const { std::cell::Cell::new(false) };
}

pub(crate) fn decision_scope<R>(f: impl FnOnce() -> R) -> R {
    IN_DECISION.with(|flag| {
        let prev = flag.replace(true);
        let out = f();
        flag.set(prev);
        out
    })
}

impl HiddenOutputLen {
    pub fn new(tokens: u32) -> HiddenOutputLen {
        assert!(tokens >= 1, "output length must be at least one token");
        HiddenOutputLen(tokens)
    }

    /// Reads the ground truth; executors only.
    pub fn reveal(&self) -> u32 {
        debug_assert!(
            !IN_DECISION.with(|flag| flag.get()),
            "scheduler decision read ground-truth output length"
        );
        self.0
    }
}

/// One inference request as the scheduler sees it.
#[derive(Debug, Clone)]
pub struct Task {
    pub id: u64,
    pub text: String,
    /// Release time, simulated seconds.
    pub arrival: f64,
    /// Absolute deadline, simulated seconds.
    pub deadline: f64,
    /// Input length in tokens (>= 1).
    pub input_len: usize,
    pub uncertainty: UncertaintyScore,
    /// Effective priority; higher pops first. Values at or above
    /// [`OVERDUE_TIER_BASE`] are the overdue tier.
    pub priority: f64,
    pub state: TaskState,
    pub start: Option<f64>,
    pub end: Option<f64>,
    true_output_len: HiddenOutputLen,
}

impl Task {
    pub fn new(
        id: u64,
        text: impl Into<String>,
        arrival: f64,
        deadline: f64,
        input_len: usize,
        uncertainty: UncertaintyScore,
        true_output_len: u32,
    ) -> Task {
        // All task timestamps live on the simulator's microsecond grid;
        // this keeps the 6-decimal CSV encoding lossless.
        let arrival = crate::util::us_to_seconds(crate::util::quantize_us(arrival));
        let deadline = crate::util::us_to_seconds(crate::util::quantize_us(deadline));
        assert!(deadline > arrival, "deadline must lie after arrival");
        assert!(input_len >= 1, "input must have at least one token");
        Task {
            id,
            text: text.into(),
            arrival,
            deadline,
            input_len,
            uncertainty,
            priority: 0.0,
            state: TaskState::Queued,
            start: None,
            end: None,
            true_output_len: HiddenOutputLen::new(true_output_len),
        }
    }

    /// Ground-truth output length; trips a debug assertion when called from
    /// scheduler decision code.
    pub fn reveal_true_output_len(&self) -> u32 {
        self.true_output_len.reveal()
    }
}

/// Deadline assignment: arrival + tightness x mu x input length, unless the
/// trace supplied an explicit deadline offset.
pub fn assign_deadline(
    arrival: f64,
    input_len: usize,
    profile: &ModelProfile,
    tightness: f64,
    user_deadline_offset: Option<f64>,
) -> f64 {
    debug_assert!(input_len >= 1);
    match user_deadline_offset {
        Some(offset) => arrival + offset,
        None => arrival + tightness * profile.deadline_per_input_token * input_len as f64,
    }
}

fn slack_seconds(task: &Task, profile: &ModelProfile) -> f64 {
    (task.deadline - task.arrival) - profile.output_token_latency * task.uncertainty.value
}

fn overdue_priority(zeta: f64) -> f64 {
    // Most negative slack first: larger -zeta sorts higher in the tier.
    OVERDUE_TIER_BASE - zeta
}

/// Slack-based priority: the reciprocal of the estimated slack. Tasks whose
/// estimated slack is gone land in the overdue tier.
pub fn priority_slack(task: &Task, profile: &ModelProfile) -> f64 {
    decision_scope(|| {
        let zeta = slack_seconds(task, profile);
        if zeta <= SLACK_EPSILON {
            overdue_priority(zeta)
        } else {
            1.0 / zeta
        }
    })
}

/// Uncertainty-aware priority: scaled-uncertainty numerator over the
/// estimated slack. With alpha = 0 this equals [`priority_slack`].
pub fn priority_up(task: &Task, cfg: &SchedulerConfig, profile: &ModelProfile) -> f64 {
    decision_scope(|| {
        let zeta = slack_seconds(task, profile);
        if zeta <= SLACK_EPSILON {
            overdue_priority(zeta)
        } else {
            let u_term = match cfg.numerator_mode {
                NumeratorMode::Normalized => task.uncertainty.normalized,
                NumeratorMode::Raw => task.uncertainty.value,
            };
            (1.0 - cfg.alpha * u_term) / zeta
        }
    })
}

/// Baseline priorities. Higher pops first; ties break on earlier arrival,
/// then lower id.
pub fn priority_baseline(task: &Task, policy: Policy) -> f64 {
    decision_scope(|| match policy {
        Policy::Fifo => -task.arrival,
        Policy::Edf => -task.deadline,
        Policy::Luf => -task.uncertainty.value,
        Policy::Muf => task.uncertainty.value,
        Policy::Up => unreachable!("UP is not a baseline"),
    })
}

pub fn assign_priority(task: &Task, cfg: &SchedulerConfig, profile: &ModelProfile) -> f64 {
    match cfg.policy {
        Policy::Up => priority_up(task, cfg, profile),
        baseline => priority_baseline(task, baseline),
    }
}

/// CPU iff the estimated uncertainty strictly exceeds the threshold.
pub fn offload_decision(uncertainty: &UncertaintyScore, threshold: f64) -> ExecutorKind {
    decision_scope(|| {
        if uncertainty.value > threshold {
            ExecutorKind::Cpu
        } else {
            ExecutorKind::Gpu
        }
    })
}

/// Dynamic consolidation: sort the staged tasks by ascending uncertainty
/// and accept the longest prefix whose adjacent uncertainty ratios stay
/// within `lambda`, capped at `capacity`. Accepted tasks form one GPU
/// batch; the rest go back to the queue with their priorities intact.
pub fn consolidate(mut staged: Vec<Task>, lambda: f64, capacity: usize) -> (Vec<Task>, Vec<Task>) {
    decision_scope(|| {
        debug_assert!(lambda >= 1.0 && capacity >= 1);
        staged.sort_by(|a, b| {
            a.uncertainty
                .value
                .partial_cmp(&b.uncertainty.value)
                .expect("uncertainty scores are finite")
                .then_with(|| a.arrival.partial_cmp(&b.arrival).unwrap())
                .then_with(|| a.id.cmp(&b.id))
        });
        let mut accepted = 0;
        while accepted < staged.len() && accepted < capacity {
            if accepted == 0
                || staged[accepted].uncertainty.value
                    <= lambda * staged[accepted - 1].uncertainty.value
            {
                accepted += 1;
            } else {
                break;
            }
        }
        let returned = staged.split_off(accepted);
        (staged, returned)
    })
}
