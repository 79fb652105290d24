//! Evaluation metrics over per-task logs: response-time statistics, miss
//! ratio, throughput, and aligned policy comparisons. Every metric is a
//! pure function of the log plus a handful of run constants, so a report
//! can be reproduced exactly from its own CSV.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sched::ExecutorKind;
use crate::sim::{SimOutcome, TaskLogRow};
use crate::util::nearest_rank_index;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no completed tasks in the log")]
    EmptyLog,
    #[error("reports carry different workload fingerprints: {0} vs {1}")]
    MismatchedWorkloads(String, String),
    #[error("cannot parse log CSV at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Run constants a log alone cannot tell: the horizon (needed to account
/// busy time of batches cut off at the end) and the CPU lane count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogContext {
    pub horizon: f64,
    pub cpu_lanes: usize,
}

/// Identity of one run, embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub policy: String,
    pub seed: u64,
    pub config_fingerprint: String,
    pub workload_fingerprint: String,
    pub lexicon_version: String,
}

/// Per-run summary of the metrics the evaluation cares about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub meta: RunMeta,
    pub context: LogContext,
    pub arrived: usize,
    pub completed: usize,
    /// Tasks still unfinished at the horizon; counted as misses and
    /// excluded from response statistics.
    pub unfinished: usize,
    pub mean_response: f64,
    pub max_response: f64,
    pub p95_response: f64,
    /// Completed tasks per simulated minute of makespan.
    pub throughput_per_min: f64,
    /// Completions bucketed per minute since the first arrival.
    pub per_minute_completions: Vec<usize>,
    pub miss_ratio: f64,
    pub gpu_utilization: f64,
    pub cpu_utilization: f64,
    pub makespan: f64,
    pub horizon_exceeded: bool,
}

/// Mean, max, and nearest-rank p95 of response times over completed tasks.
pub fn response_stats(rows: &[TaskLogRow]) -> Result<(f64, f64, f64), MetricsError> {
    let responses: Vec<f64> = rows.iter().filter_map(|r| r.response).collect();
    if responses.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let mean = responses.iter().sum::<f64>() / responses.len() as f64;
    let max = responses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sorted = responses;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p95 = sorted[nearest_rank_index(0.95, sorted.len())];
    Ok((mean, max, p95))
}

/// Fraction of arrived tasks that ended after their deadline; tasks
/// unfinished at the horizon count as misses.
pub fn miss_ratio(rows: &[TaskLogRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.missed).count() as f64 / rows.len() as f64
}

/// Average completions per simulated minute plus the per-minute series
/// (bucketed from the first arrival).
pub fn throughput(rows: &[TaskLogRow], makespan: f64) -> (f64, Vec<usize>) {
    let first_arrival = rows
        .iter()
        .map(|r| r.arrival)
        .fold(f64::INFINITY, f64::min);
    let ends: Vec<f64> = rows.iter().filter_map(|r| r.end).collect();
    if ends.is_empty() || makespan <= 0.0 {
        return (0.0, Vec::new());
    }
    let mut series = vec![0usize; (makespan / 60.0).ceil().max(1.0) as usize];
    for end in &ends {
        let bucket = ((end - first_arrival) / 60.0) as usize;
        let bucket = bucket.min(series.len() - 1);
        series[bucket] += 1;
    }
    (ends.len() as f64 / (makespan / 60.0), series)
}

fn executor_busy(rows: &[TaskLogRow], executor: ExecutorKind, horizon: f64) -> f64 {
    // One interval per batch; unfinished batches are clipped at the horizon.
    let mut batches: std::collections::BTreeMap<u64, (f64, f64)> = Default::default();
    for row in rows {
        if row.executor == Some(executor) {
            if let (Some(batch), Some(start)) = (row.batch_id, row.start) {
                batches.insert(batch, (start, row.end.unwrap_or(horizon)));
            }
        }
    }
    batches.values().map(|(s, e)| (e - s).max(0.0)).sum()
}

/// Builds the full report from a log. `run_sim` output and a re-parsed CSV
/// go through this same function, so the two agree exactly.
pub fn report_from_rows(
    rows: &[TaskLogRow],
    ctx: LogContext,
    meta: RunMeta,
) -> Result<SimReport, MetricsError> {
    let arrived = rows.len();
    let completed = rows.iter().filter(|r| r.end.is_some()).count();
    let unfinished = arrived - completed;
    let (mean, max, p95) = match response_stats(rows) {
        Ok(stats) => stats,
        Err(MetricsError::EmptyLog) if arrived == 0 => (0.0, 0.0, 0.0),
        Err(e) => return Err(e),
    };
    let first_arrival = rows
        .iter()
        .map(|r| r.arrival)
        .fold(f64::INFINITY, f64::min);
    let makespan = if arrived == 0 {
        0.0
    } else if unfinished > 0 {
        (ctx.horizon - first_arrival).max(0.0)
    } else {
        rows.iter().filter_map(|r| r.end).fold(first_arrival, f64::max) - first_arrival
    };
    let (tput, series) = throughput(rows, makespan);
    let gpu_busy = executor_busy(rows, ExecutorKind::Gpu, ctx.horizon);
    let cpu_busy = executor_busy(rows, ExecutorKind::Cpu, ctx.horizon);
    Ok(SimReport {
        meta,
        context: ctx,
        arrived,
        completed,
        unfinished,
        mean_response: mean,
        max_response: max,
        p95_response: p95,
        throughput_per_min: tput,
        per_minute_completions: series,
        miss_ratio: miss_ratio(rows),
        gpu_utilization: if makespan > 0.0 { gpu_busy / makespan } else { 0.0 },
        cpu_utilization: if makespan > 0.0 {
            cpu_busy / (ctx.cpu_lanes as f64 * makespan)
        } else {
            0.0
        },
        makespan,
        horizon_exceeded: unfinished > 0,
    })
}

pub fn report_from_outcome(
    outcome: &SimOutcome,
    horizon: f64,
    meta: RunMeta,
) -> Result<SimReport, MetricsError> {
    report_from_rows(
        &outcome.rows,
        LogContext {
            horizon,
            cpu_lanes: outcome.cpu_lanes,
        },
        meta,
    )
}

pub const LOG_CSV_HEADER: &str =
    "task_id,arrival,deadline,uncertainty,priority,executor,batch_id,start,end,response,missed";

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Serializes the per-task log; times carry six decimal places (exactly
/// the microsecond quantum of the simulator, so the encoding is lossless).
pub fn log_to_csv(rows: &[TaskLogRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + 128);
    out.push_str(LOG_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let executor = match r.executor {
            Some(ExecutorKind::Gpu) => "gpu",
            Some(ExecutorKind::Cpu) => "cpu",
            None => "",
        };
        // Times print at 6 decimals (exactly the microsecond quantum);
        // uncertainty and priority are not times and print full precision.
        out.push_str(&format!(
            "{},{:.6},{:.6},{},{},{},{},{},{},{},{}\n",
            r.task_id,
            r.arrival,
            r.deadline,
            r.uncertainty,
            r.priority,
            executor,
            r.batch_id.map(|b| b.to_string()).unwrap_or_default(),
            fmt_opt(r.start),
            fmt_opt(r.end),
            fmt_opt(r.response),
            u8::from(r.missed),
        ));
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<Vec<TaskLogRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == LOG_CSV_HEADER => {}
        _ => {
            return Err(MetricsError::Csv {
                line: 1,
                msg: "missing or wrong header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| MetricsError::Csv {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(err("expected 11 fields"));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| err("bad float"));
        let parse_opt = |s: &str| -> Result<Option<f64>, MetricsError> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(parse_f(s)?))
            }
        };
        let arrival = parse_f(fields[1])?;
        let end = parse_opt(fields[8])?;
        // The response column is derived data; recompute it from the
        // microsecond-exact times so a reparsed log reproduces the report
        // bit for bit, and validate the column against it.
        let response = end.map(|e| e - arrival);
        if let (Some(stored), Some(actual)) = (parse_opt(fields[9])?, response) {
            if (stored - actual).abs() > 1e-6 {
                return Err(err("response column disagrees with end - arrival"));
            }
        }
        rows.push(TaskLogRow {
            task_id: fields[0].parse().map_err(|_| err("bad task id"))?,
            arrival,
            deadline: parse_f(fields[2])?,
            uncertainty: parse_f(fields[3])?,
            priority: parse_f(fields[4])?,
            executor: match fields[5] {
                "gpu" => Some(ExecutorKind::Gpu),
                "cpu" => Some(ExecutorKind::Cpu),
                "" => None,
                _ => return Err(err("bad executor")),
            },
            batch_id: if fields[6].is_empty() {
                None
            } else {
                Some(fields[6].parse().map_err(|_| err("bad batch id"))?)
            },
            start: parse_opt(fields[7])?,
            end,
            response,
            missed: match fields[10] {
                "0" => false,
                "1" => true,
                _ => return Err(err("bad missed flag")),
            },
        });
    }
    Ok(rows)
}

/// Mean and sample standard deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Per-policy aggregate over seeds of the same workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: String,
    pub workload_fingerprint: String,
    pub seeds: usize,
    pub mean_response: Stat,
    pub max_response: Stat,
    pub p95_response: Stat,
    pub miss_ratio: Stat,
    pub throughput_per_min: Stat,
    pub gpu_utilization: Stat,
    pub cpu_utilization: Stat,
}

/// Groups reports by policy. All reports must describe the same workload.
pub fn aggregate_reports(reports: &[SimReport]) -> Result<Vec<PolicyAggregate>, MetricsError> {
    assert!(!reports.is_empty());
    let fingerprint = &reports[0].meta.workload_fingerprint;
    for report in reports {
        if &report.meta.workload_fingerprint != fingerprint {
            return Err(MetricsError::MismatchedWorkloads(
                fingerprint.clone(),
                report.meta.workload_fingerprint.clone(),
            ));
        }
    }
    let mut policies: Vec<String> = Vec::new();
    for report in reports {
        if !policies.contains(&report.meta.policy) {
            policies.push(report.meta.policy.clone());
        }
    }
    let collect = |policy: &str, f: &dyn Fn(&SimReport) -> f64| -> Stat {
        let values: Vec<f64> = reports
            .iter()
            .filter(|r| r.meta.policy == policy)
            .map(|r| f(r))
            .collect();
        Stat::of(&values)
    };
    Ok(policies
        .iter()
        .map(|policy| PolicyAggregate {
            policy: policy.clone(),
            workload_fingerprint: fingerprint.clone(),
            seeds: reports.iter().filter(|r| &r.meta.policy == policy).count(),
            mean_response: collect(policy, &|r| r.mean_response),
            max_response: collect(policy, &|r| r.max_response),
            p95_response: collect(policy, &|r| r.p95_response),
            miss_ratio: collect(policy, &|r| r.miss_ratio),
            throughput_per_min: collect(policy, &|r| r.throughput_per_min),
            gpu_utilization: collect(policy, &|r| r.gpu_utilization),
            cpu_utilization: collect(policy, &|r| r.cpu_utilization),
        })
        .collect())
}

/// Aligned comparison table with percentage deltas against the FIFO row
/// (or the first policy when FIFO is absent).
pub fn comparison_csv(aggregates: &[PolicyAggregate]) -> String {
    let baseline = aggregates
        .iter()
        .find(|a| a.policy == "fifo")
        .unwrap_or(&aggregates[0]);
    let delta = |value: f64, base: f64| {
        if base == 0.0 {
            0.0
        } else {
            (value - base) / base * 100.0
        }
    };
    let mut out = String::from(
        "policy,seeds,mean_response,mean_response_std,p95_response,max_response,\
         miss_ratio,throughput_per_min,gpu_utilization,cpu_utilization,\
         mean_response_delta_vs_fifo_pct,miss_ratio_delta_vs_fifo_pct\n",
    );
    for agg in aggregates {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.2},{:.2}\n",
            agg.policy,
            agg.seeds,
            agg.mean_response.mean,
            agg.mean_response.std,
            agg.p95_response.mean,
            agg.max_response.mean,
            agg.miss_ratio.mean,
            agg.throughput_per_min.mean,
            agg.gpu_utilization.mean,
            agg.cpu_utilization.mean,
            delta(agg.mean_response.mean, baseline.mean_response.mean),
            delta(agg.miss_ratio.mean, baseline.miss_ratio.mean),
        ));
    }
    out
}
