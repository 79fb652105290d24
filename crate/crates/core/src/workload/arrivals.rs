//! Poisson arrival synthesis: per-minute rates with exponential
//! inter-arrival gaps, plus the wait-interval grouping the simulator uses
//! for flush-timer hints.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::util::{quantize_us, substream, us_to_seconds};

/// Arrival rate schedule in queries per minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BetaSchedule {
    /// The same rate for every minute.
    Constant { rate: f64 },
    /// Rate from + m at minute m, capped at `to` (the light-load to
    /// high-traffic ramp).
    Ramp { from: u32, to: u32 },
    /// Explicit per-minute rates; the last entry repeats.
    PerMinute { rates: Vec<f64> },
}

impl BetaSchedule {
    /// Parses "60" as a constant rate, "10:150" as a ramp, and
    /// "10,150,40" as explicit per-minute rates.
    pub fn parse(s: &str) -> Option<BetaSchedule> {
        if let Some((from, to)) = s.split_once(':') {
            let from = from.trim().parse().ok()?;
            let to = to.trim().parse().ok()?;
            if from == 0 || to < from {
                return None;
            }
            Some(BetaSchedule::Ramp { from, to })
        } else if s.contains(',') {
            let rates: Option<Vec<f64>> =
                s.split(',').map(|r| r.trim().parse::<f64>().ok()).collect();
            let rates = rates?;
            (!rates.is_empty() && rates.iter().all(|r| *r > 0.0))
                .then_some(BetaSchedule::PerMinute { rates })
        } else {
            let rate: f64 = s.trim().parse().ok()?;
            (rate > 0.0).then_some(BetaSchedule::Constant { rate })
        }
    }

    /// Queries per minute during minute `m` (0-based).
    pub fn rate_at_minute(&self, minute: u64) -> f64 {
        match self {
            BetaSchedule::Constant { rate } => *rate,
            BetaSchedule::Ramp { from, to } => {
                ((*from as u64 + minute) as f64).min(*to as f64)
            }
            BetaSchedule::PerMinute { rates } => {
                rates[(minute as usize).min(rates.len() - 1)]
            }
        }
    }
}

impl std::fmt::Display for BetaSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BetaSchedule::Constant { rate } => write!(f, "{rate}"),
            BetaSchedule::Ramp { from, to } => write!(f, "{from}:{to}"),
            BetaSchedule::PerMinute { rates } => {
                let parts: Vec<String> = rates.iter().map(|r| r.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

/// Reproducible arrival times plus the record-to-arrival assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalPlan {
    /// Non-decreasing arrival times in seconds, microsecond-quantized.
    pub arrivals: Vec<f64>,
    /// `record_order[i]` is the record index mapped to arrival `i`
    /// (the seeded shuffle of the test set).
    pub record_order: Vec<usize>,
    pub schedule: BetaSchedule,
    pub seed: u64,
}

/// Draws `n` arrivals with exponential inter-arrival gaps. The gap leaving
/// time `t` uses the rate of the minute containing `t`. Record indices are
/// shuffled onto the arrivals with an independent sub-stream.
pub fn gen_arrivals(n: usize, schedule: BetaSchedule, seed: u64) -> ArrivalPlan {
    assert!(n >= 1, "need at least one arrival");
    let mut rng = substream(seed, "arrivals");
    let mut arrivals = Vec::with_capacity(n);
    let mut t = 0.0f64;
    while arrivals.len() < n {
        let rate_per_minute = schedule.rate_at_minute((t / 60.0) as u64);
        let rate_per_second = rate_per_minute / 60.0;
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / rate_per_second;
        arrivals.push(us_to_seconds(quantize_us(t)));
    }

    let mut record_order: Vec<usize> = (0..n).collect();
    record_order.shuffle(&mut substream(seed, "shuffle"));

    ArrivalPlan {
        arrivals,
        record_order,
        schedule,
        seed,
    }
}

impl ArrivalPlan {
    /// CSV with the `task_id,arrival_s` schema.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task_id,arrival_s\n");
        for (arrival, record) in self.arrivals.iter().zip(&self.record_order) {
            out.push_str(&format!("{record},{arrival:.6}\n"));
        }
        out
    }

    pub fn last_arrival(&self) -> f64 {
        self.arrivals.last().copied().unwrap_or(0.0)
    }
}

/// One wait-interval window: every arrival that lands within `xi` seconds
/// of the window's opening arrival is eligible for the same staging round.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchEpoch {
    /// When the window closes (opening arrival + xi).
    pub end: f64,
    /// Indices into the arrival plan.
    pub arrival_indices: Vec<usize>,
}

/// Groups arrivals into rolling wait-interval windows; the simulator uses
/// the window ends as flush-timer hints.
pub fn apply_wait_interval(plan: &ArrivalPlan, xi: f64) -> Vec<DispatchEpoch> {
    assert!(xi > 0.0);
    let mut epochs: Vec<DispatchEpoch> = Vec::new();
    for (i, &t) in plan.arrivals.iter().enumerate() {
        match epochs.last_mut() {
            Some(epoch) if t < epoch.end => epoch.arrival_indices.push(i),
            _ => epochs.push(DispatchEpoch {
                end: t + xi,
                arrival_indices: vec![i],
            }),
        }
    }
    epochs
}
