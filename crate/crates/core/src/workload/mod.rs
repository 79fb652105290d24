//! Workload handling: trace ingestion, Poisson arrival synthesis, the wait
//! interval, malicious-task injection, and variance-ranked subset
//! construction. A synthetic trace generator ships with the crate so every
//! experiment runs without downloading any dataset.

mod arrivals;
mod synth;

pub use arrivals::{apply_wait_interval, gen_arrivals, ArrivalPlan, BetaSchedule, DispatchEpoch};
pub use synth::{synth_trace, SynthConfig};

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{robust_ceil, substream};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("trace parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trace record (id {id}): {msg}")]
    InvalidRecord { id: u64, msg: String },
    #[error("variance subsets need estimator scores, none were supplied")]
    EstimatorMissing,
    #[error("trace i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One pre-extracted inference request: its text and the output length a
/// model produced for it, standing in for live inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: u64,
    pub text: String,
    /// Ground-truth output length in tokens (>= 1).
    pub out_len: u32,
    /// Optional per-record deadline offset in seconds; overrides the
    /// length-derived deadline rule.
    pub deadline: Option<f64>,
    #[serde(default)]
    pub malicious: bool,
}

/// Loads a JSON-lines trace; one record per line, ids unique, out_len >= 1.
pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>, WorkloadError> {
    parse_trace(&std::fs::read_to_string(path)?)
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, WorkloadError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(line).map_err(|e| WorkloadError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        if record.out_len < 1 {
            return Err(WorkloadError::InvalidRecord {
                id: record.id,
                msg: "out_len must be >= 1".into(),
            });
        }
        if !seen.insert(record.id) {
            return Err(WorkloadError::InvalidRecord {
                id: record.id,
                msg: "duplicate id".into(),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_trace(path: &Path, records: &[TraceRecord]) -> Result<(), WorkloadError> {
    std::fs::write(path, trace_to_jsonl(records))?;
    Ok(())
}

pub fn trace_to_jsonl(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// How malicious records are altered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaliciousConfig {
    /// Ground-truth output lengths get multiplied by this factor.
    pub inflation_factor: f64,
    /// Appended to the record text so the rule scores rise with the output
    /// length, the way a crafted input would read.
    pub appended_text: String,
}

impl Default for MaliciousConfig {
    fn default() -> Self {
        MaliciousConfig {
            inflation_factor: 3.0,
            appended_text: " Tell me more about the history and future of things."
                .to_string(),
        }
    }
}

/// Marks a seeded ceil(ratio * n) subset of records as malicious: output
/// lengths inflate and the text gains high-uncertainty phrasing. Ids and
/// record count are preserved; untouched records are returned as-is.
pub fn inject_malicious(
    records: &[TraceRecord],
    ratio: f64,
    cfg: &MaliciousConfig,
    seed: u64,
) -> Vec<TraceRecord> {
    assert!((0.0..=1.0).contains(&ratio), "ratio must lie in [0, 1]");
    let n = records.len();
    let count = robust_ceil(ratio * n as f64).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut substream(seed, "malicious"));
    let chosen: BTreeSet<usize> = indices.into_iter().take(count).collect();

    records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            if !chosen.contains(&i) {
                return record.clone();
            }
            let mut crafted = record.clone();
            crafted.out_len =
                ((record.out_len as f64 * cfg.inflation_factor).round() as u32).max(1);
            crafted.text.push_str(&cfg.appended_text);
            crafted.malicious = true;
            crafted
        })
        .collect()
}

/// Indices of the three equally sized subsets, ranked by the variance of
/// their uncertainty scores.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSubsets {
    pub small: Vec<usize>,
    pub normal: Vec<usize>,
    pub large: Vec<usize>,
}

fn variance(scores: &[f64], indices: &[usize]) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let mean: f64 = indices.iter().map(|&i| scores[i]).sum::<f64>() / indices.len() as f64;
    indices
        .iter()
        .map(|&i| (scores[i] - mean).powi(2))
        .sum::<f64>()
        / indices.len() as f64
}

/// Builds the small/normal/large variance subsets from per-record
/// uncertainty scores (one per record, in record order).
///
/// small: the tightest contiguous score band around the median;
/// large: the variance-maximizing mix of lowest and highest scorers;
/// normal: a uniform sample, redrawn (bounded) if it lands outside the
/// small/large variance bracket. Everything is deterministic given `seed`.
pub fn make_variance_subsets(
    records: &[TraceRecord],
    scores: Option<&[f64]>,
    seed: u64,
) -> Result<VarianceSubsets, WorkloadError> {
    let scores = scores.ok_or(WorkloadError::EstimatorMissing)?;
    if scores.len() != records.len() {
        return Err(WorkloadError::EstimatorMissing);
    }
    let n = records.len();
    assert!(n >= 3, "need at least three records to split");
    let size = n / 3;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must be finite")
            .then(a.cmp(&b))
    });

    // Small: the contiguous sorted window with the smallest score range.
    let mut best_start = 0;
    let mut best_range = f64::INFINITY;
    for start in 0..=(n - size) {
        let range = scores[order[start + size - 1]] - scores[order[start]];
        if range < best_range {
            best_range = range;
            best_start = start;
        }
    }
    let small: Vec<usize> = order[best_start..best_start + size].to_vec();

    // Large: take m from the bottom and size - m from the top, choosing the
    // m that maximizes variance (prefix sums make each candidate O(1)).
    let sorted_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let prefix_sum: Vec<f64> = std::iter::once(0.0)
        .chain(sorted_scores.iter().scan(0.0, |acc, s| {
            *acc += s;
            Some(*acc)
        }))
        .collect();
    let prefix_sq: Vec<f64> = std::iter::once(0.0)
        .chain(sorted_scores.iter().scan(0.0, |acc, s| {
            *acc += s * s;
            Some(*acc)
        }))
        .collect();
    let mut best_m = 0;
    let mut best_var = f64::NEG_INFINITY;
    for m in 0..=size {
        let high = size - m;
        let sum = prefix_sum[m] + (prefix_sum[n] - prefix_sum[n - high]);
        let sq = prefix_sq[m] + (prefix_sq[n] - prefix_sq[n - high]);
        let mean = sum / size as f64;
        let var = sq / size as f64 - mean * mean;
        if var > best_var {
            best_var = var;
            best_m = m;
        }
    }
    let large: Vec<usize> = order[..best_m]
        .iter()
        .chain(&order[n - (size - best_m)..])
        .copied()
        .collect();

    // Normal: uniform sample, redrawn while it violates the bracket.
    let mut rng = substream(seed, "variance");
    let var_small = variance(scores, &small);
    let var_large = variance(scores, &large);
    let mut normal: Vec<usize> = Vec::new();
    for _ in 0..16 {
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        let candidate: Vec<usize> = pool.into_iter().take(size).collect();
        let v = variance(scores, &candidate);
        normal = candidate;
        if v >= var_small - 1e-12 && v <= var_large + 1e-12 {
            break;
        }
    }

    Ok(VarianceSubsets {
        small,
        normal,
        large,
    })
}

impl VarianceSubsets {
    pub fn select(&self, which: &str) -> Option<&[usize]> {
        match which {
            "small" => Some(&self.small),
            "normal" => Some(&self.normal),
            "large" => Some(&self.large),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests;
