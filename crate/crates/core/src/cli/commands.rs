//! The profile / run / compare / report subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::estimator::{profile_offline, ProfileConfig, TrainConfig, TrainRecord};
use crate::metrics::{
    aggregate_reports, comparison_csv, log_from_csv, log_to_csv, report_from_outcome,
    report_from_rows, LogContext, RunMeta, SimReport,
};
use crate::sched::Policy;
use crate::sim::{run_sim, SimConfig, SimOutcome};
use crate::textfeat::{RuleGen, FEATURE_COUNT};
use crate::workload::{
    gen_arrivals, inject_malicious, load_trace, make_variance_subsets, save_trace, synth_trace,
    MaliciousConfig, SynthConfig,
};

use super::{
    build_tasks, config_err, runtime_err, score_records, workload_fingerprint, CliError,
    Overrides, RunConfig, ScoreSource, ScoredRecord,
};

#[derive(Parser, Debug)]
#[command(
    name = "lmsched",
    version,
    about = "Uncertainty-aware scheduling simulator for batched language-model inference"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Offline profiling: train the length regressor on a trace and write
    /// the profile artifact.
    Profile(ProfileArgs),
    /// Run one simulation and write the per-task CSV plus a JSON summary.
    Run(RunFlags),
    /// Run a policy/seed grid on identical arrival plans and write an
    /// aligned comparison table (or a parameter sweep).
    Compare(CompareArgs),
    /// Recompute a summary from a per-task CSV and verify it against the
    /// stored JSON summary.
    Report(ReportArgs),
    /// Generate a synthetic trace file.
    SynthTrace(SynthArgs),
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Training trace (JSON lines).
    #[arg(long)]
    trace: PathBuf,
    /// Offload quantile level.
    #[arg(long, default_value_t = 0.9)]
    k: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hidden layer sizes, comma separated.
    #[arg(long, default_value = "100,200,200,100")]
    hidden: String,
    /// Feed the input length as an extra regressor feature.
    #[arg(long, default_value_t = false)]
    include_input_len: bool,
    /// Output path of the profile artifact.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Default)]
struct RunFlags {
    /// Run configuration (TOML). Flags below override config keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Overrides `profile`.
    #[arg(long)]
    profile: Option<String>,
    /// Overrides `scheduler.policy`.
    #[arg(long)]
    policy: Option<String>,
    /// Overrides `scheduler.alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Overrides `scheduler.lambda`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides `scheduler.b`.
    #[arg(long)]
    b: Option<f64>,
    /// Overrides `scheduler.k`.
    #[arg(long)]
    k: Option<f64>,
    /// Overrides `workload.beta_schedule`.
    #[arg(long = "beta-schedule")]
    beta_schedule: Option<String>,
    /// Overrides `workload.xi`.
    #[arg(long)]
    xi: Option<f64>,
    /// Overrides `workload.malicious_ratio`.
    #[arg(long = "malicious-ratio")]
    malicious_ratio: Option<f64>,
    /// Overrides `workload.variance_subset`.
    #[arg(long)]
    variance: Option<String>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `estimator.artifact` (and sets the source to artifact).
    #[arg(long)]
    estimator: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Policies to compare, comma separated.
    #[arg(long, default_value = "fifo,edf,luf,muf,up")]
    policies: String,
    /// Seeds to average over, comma separated.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    /// Parameter sweep `param:lo:hi:step` over alpha, lambda, b, or k.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Per-task log CSV.
    #[arg(long)]
    log: PathBuf,
    /// Stored JSON summary to verify against.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra probability mass on the longest open-ended/multi-part
    /// templates (calibration traces use ~0.35).
    #[arg(long = "tail-boost", default_value_t = 0.0)]
    tail_boost: f64,
    #[arg(long)]
    out: PathBuf,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            trace: self.trace.clone(),
            profile: self.profile.clone(),
            policy: self.policy.clone(),
            alpha: self.alpha,
            lambda: self.lambda,
            b: self.b,
            k: self.k,
            beta_schedule: self.beta_schedule.clone(),
            xi: self.xi,
            malicious_ratio: self.malicious_ratio,
            variance: self.variance.clone(),
            seed: self.seed,
            out: self.out.clone(),
            estimator_artifact: self.estimator.clone(),
        }
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let overrides = self.overrides();
        match &self.config {
            Some(path) => RunConfig::load(path, &overrides),
            None => {
                let trace = overrides
                    .trace
                    .clone()
                    .ok_or_else(|| config_err("either --config or --trace is required"))?;
                let mut config: RunConfig =
                    toml::from_str(&format!("trace = {:?}", trace.to_string_lossy()))
                        .map_err(|e| config_err(e))?;
                config.apply(&overrides)?;
                config.validate()?;
                Ok(config)
            }
        }
    }
}

/// Parses the CLI and runs the chosen command, returning the process exit
/// code (0 success, 2 config error, 3 runtime error).
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Profile(args) => cmd_profile_args(&args),
        Command::Run(args) => args.resolve().and_then(|config| cmd_run(&config).map(|_| ())),
        Command::Compare(args) => {
            let config = args.run.resolve();
            config.and_then(|config| {
                let policies: Vec<String> =
                    args.policies.split(',').map(|p| p.trim().to_string()).collect();
                let seeds: Result<Vec<u64>, _> =
                    args.seeds.split(',').map(|s| s.trim().parse::<u64>()).collect();
                let seeds = seeds.map_err(|e| config_err(format!("bad --seeds: {e}")))?;
                cmd_compare(&config, &policies, &seeds, args.sweep.as_deref()).map(|_| ())
            })
        }
        Command::Report(args) => cmd_report(&args.log, args.summary.as_deref()),
        Command::SynthTrace(args) => cmd_synth_trace(args.n, args.seed, args.tail_boost, &args.out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_profile_args(args: &ProfileArgs) -> Result<(), CliError> {
    let hidden: Result<Vec<usize>, _> =
        args.hidden.split(',').map(|d| d.trim().parse::<usize>()).collect();
    let hidden = hidden.map_err(|e| config_err(format!("bad --hidden: {e}")))?;
    if !(args.k > 0.0 && args.k < 1.0) {
        return Err(config_err("k must lie in (0, 1)"));
    }
    let train = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        batch_size: args.batch,
        seed: args.seed,
        ..TrainConfig::default()
    };
    cmd_profile(
        &args.trace,
        args.k,
        &hidden,
        train,
        args.include_input_len,
        &args.out,
    )
}

/// Offline profiling: rule features over the trace, regressor training,
/// and the frozen (tau, u_max) pair, persisted as one artifact.
pub fn cmd_profile(
    trace: &Path,
    k: f64,
    hidden: &[usize],
    train: TrainConfig,
    include_input_len: bool,
    out: &Path,
) -> Result<(), CliError> {
    if !trace.exists() {
        return Err(config_err(format!("trace file does not exist: {}", trace.display())));
    }
    let records = load_trace(trace).map_err(config_err)?;
    if records.is_empty() {
        return Err(config_err("training trace is empty"));
    }
    let rulegen = RuleGen::builtin();
    let train_records: Vec<TrainRecord> = records
        .iter()
        .map(|r| {
            let tokens = crate::textfeat::tokenize(&r.text, rulegen.lexicon());
            TrainRecord {
                features: rulegen.feature_vector_of_tokens(&tokens),
                input_len: tokens.len(),
                target_len: r.out_len,
            }
        })
        .collect();

    let mut dims = vec![FEATURE_COUNT + usize::from(include_input_len)];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let cfg = ProfileConfig {
        dims,
        train,
        include_input_len,
        scorer_weights: *rulegen.weights(),
    };
    let profile = profile_offline(&train_records, k, &cfg).map_err(runtime_err)?;
    let artifact = profile.to_artifact(rulegen.lexicon().version());
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime_err)?;
        }
    }
    artifact.save(out).map_err(runtime_err)?;
    let final_loss = profile.report.epoch_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "profiled {} records: tau={:.6} u_max={:.6} final_loss={:.6} attempts={} -> {}",
        records.len(),
        profile.tau,
        profile.u_max,
        final_loss,
        profile.report.attempts,
        out.display()
    );
    println!("content hash: {}", artifact.content_hash);
    Ok(())
}

/// Files one run writes.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Stored alongside the log: the report plus the fully resolved config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub report: SimReport,
    pub config: RunConfig,
}

/// Loads, scores, and optionally subsets the records for one run seed.
/// Returns the tasks' score source view of the model profile (with the
/// trained threshold/ceiling substituted when an artifact is active) and
/// the seed-independent workload-family fingerprint.
fn prepare_records(
    config: &RunConfig,
    seed: u64,
) -> Result<(Vec<ScoredRecord>, crate::sim::ModelProfile, String), CliError> {
    let records = load_trace(&config.trace).map_err(config_err)?;
    if records.is_empty() {
        return Err(config_err("trace is empty"));
    }
    let mut model = config.load_model_profile()?;
    let fp = workload_fingerprint(
        &records,
        &config.beta_schedule(),
        config.workload.xi,
        config.tightness()?,
        &model.name,
        config.workload.malicious_ratio,
        config.workload.malicious_inflation,
        &config.workload.variance_subset,
    );
    let records = if config.workload.malicious_ratio > 0.0 {
        let malicious_cfg = MaliciousConfig {
            inflation_factor: config.workload.malicious_inflation,
            ..MaliciousConfig::default()
        };
        inject_malicious(&records, config.workload.malicious_ratio, &malicious_cfg, seed)
    } else {
        records
    };
    let source = ScoreSource::from_config(&config.estimator)?;
    if let ScoreSource::Artifact(scorer) = &source {
        // The trained quantile threshold and ceiling replace the reference
        // constants so online decisions agree with the scorer that made
        // the estimates.
        model.offload_threshold = scorer.tau();
        model.uncertainty_ceiling = scorer.u_max();
    }
    let scored = score_records(&records, &source, &RuleGen::builtin(), model.uncertainty_ceiling)?;

    if config.workload.variance_subset == "all" {
        return Ok((scored, model, fp));
    }
    let plain: Vec<_> = scored.iter().map(|s| s.record.clone()).collect();
    let scores: Vec<f64> = scored.iter().map(|s| s.uncertainty.value).collect();
    let subsets = make_variance_subsets(&plain, Some(&scores), seed).map_err(runtime_err)?;
    let chosen = subsets
        .select(&config.workload.variance_subset)
        .expect("subset name validated");
    Ok((chosen.iter().map(|&i| scored[i].clone()).collect(), model, fp))
}

/// One simulation, in memory. Policy and seed override the config's own,
/// which is what `compare` uses to hold the workload fixed across
/// policies.
pub fn execute_run(
    config: &RunConfig,
    policy: Policy,
    seed: u64,
) -> Result<(SimReport, SimOutcome), CliError> {
    let mut config = config.clone();
    config.scheduler.policy = policy;
    config.seed = seed;

    let (scored, model, workload_fp) = prepare_records(&config, seed)?;
    let plan = gen_arrivals(scored.len(), config.beta_schedule(), seed);
    let tightness = config.tightness()?;
    let tasks = build_tasks(&scored, &plan, &model, tightness);
    let horizon = plan.last_arrival() + config.workload.horizon_slack;
    let sim = SimConfig {
        xi: config.workload.xi,
        horizon,
        decision_overhead: config.workload.decision_overhead,
    };
    let outcome = run_sim(tasks, &config.scheduler, &model, &sim).map_err(runtime_err)?;

    let meta = RunMeta {
        policy: policy.name().to_string(),
        seed,
        config_fingerprint: config.fingerprint(),
        workload_fingerprint: workload_fp,
        lexicon_version: RuleGen::builtin().lexicon().version().to_string(),
    };
    let report = report_from_outcome(&outcome, horizon, meta).map_err(runtime_err)?;
    Ok((report, outcome))
}

/// Runs one simulation per the config and writes `run_<policy>_seed<n>.csv`
/// and `.json` under the output directory.
pub fn cmd_run(config: &RunConfig) -> Result<RunPaths, CliError> {
    let (report, outcome) = execute_run(config, config.scheduler.policy, config.seed)?;
    std::fs::create_dir_all(&config.out_dir).map_err(runtime_err)?;
    let stem = format!("run_{}_seed{}", report.meta.policy, report.meta.seed);
    let csv_path = config.out_dir.join(format!("{stem}.csv"));
    let summary_path = config.out_dir.join(format!("{stem}.json"));
    std::fs::write(&csv_path, log_to_csv(&outcome.rows)).map_err(runtime_err)?;
    let summary = RunSummary {
        report: report.clone(),
        config: config.clone(),
    };
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(runtime_err)?;

    println!(
        "{}: {} tasks, mean response {:.3}s, p95 {:.3}s, miss ratio {:.4}, gpu util {:.3}",
        report.meta.policy,
        report.arrived,
        report.mean_response,
        report.p95_response,
        report.miss_ratio,
        report.gpu_utilization,
    );
    if report.horizon_exceeded {
        println!(
            "warning: {} tasks unfinished at horizon {:.1}s",
            report.unfinished, report.context.horizon
        );
    }
    println!("wrote {} and {}", csv_path.display(), summary_path.display());
    Ok(RunPaths {
        csv: csv_path,
        summary: summary_path,
    })
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(config_err("sweep must be param:lo:hi:step"));
    }
    let param = parts[0].to_string();
    if !matches!(param.as_str(), "alpha" | "lambda" | "b" | "k") {
        return Err(config_err(format!("cannot sweep `{param}`")));
    }
    let lo: f64 = parts[1].parse().map_err(|_| config_err("bad sweep lo"))?;
    let hi: f64 = parts[2].parse().map_err(|_| config_err("bad sweep hi"))?;
    let step: f64 = parts[3].parse().map_err(|_| config_err("bad sweep step"))?;
    if step <= 0.0 || hi < lo {
        return Err(config_err("sweep needs step > 0 and hi >= lo"));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((param, (0..count).map(|i| lo + step * i as f64).collect()))
}

fn set_sweep_param(config: &mut RunConfig, param: &str, value: f64) {
    match param {
        "alpha" => config.scheduler.alpha = value,
        "lambda" => config.scheduler.lambda = value,
        "b" => config.scheduler.b = value,
        "k" => config.scheduler.k = value,
        _ => unreachable!("validated in parse_sweep"),
    }
}

/// Policy/seed comparison grid (or a parameter sweep when `sweep` is
/// given). Every (policy, seed) cell replays the identical arrival plan.
pub fn cmd_compare(
    config: &RunConfig,
    policies: &[String],
    seeds: &[u64],
    sweep: Option<&str>,
) -> Result<PathBuf, CliError> {
    if seeds.is_empty() {
        return Err(config_err("need at least one seed"));
    }
    std::fs::create_dir_all(&config.out_dir).map_err(runtime_err)?;

    if let Some(spec) = sweep {
        let (param, values) = parse_sweep(spec)?;
        let policy = config.scheduler.policy;
        let mut out = String::from(
            "param,value,policy,seeds,mean_response,mean_response_std,p95_response,\
             miss_ratio,throughput_per_min\n",
        );
        for value in &values {
            let mut swept = config.clone();
            set_sweep_param(&mut swept, &param, *value);
            swept.scheduler.validate().map_err(config_err)?;
            let mut reports = Vec::new();
            for &seed in seeds {
                reports.push(execute_run(&swept, policy, seed)?.0);
            }
            let aggs = aggregate_reports(&reports).map_err(runtime_err)?;
            let agg = &aggs[0];
            out.push_str(&format!(
                "{},{:.4},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                param,
                value,
                policy.name(),
                seeds.len(),
                agg.mean_response.mean,
                agg.mean_response.std,
                agg.p95_response.mean,
                agg.miss_ratio.mean,
                agg.throughput_per_min.mean,
            ));
        }
        let path = config.out_dir.join(format!("sweep_{param}.csv"));
        std::fs::write(&path, &out).map_err(runtime_err)?;
        println!("swept {} over {} values x {} seeds -> {}", param, values.len(), seeds.len(), path.display());
        return Ok(path);
    }

    let mut parsed = Vec::with_capacity(policies.len());
    for name in policies {
        parsed.push(
            Policy::parse(name)
                .ok_or_else(|| config_err(format!("unknown policy `{name}`")))?,
        );
    }
    let mut reports = Vec::new();
    for &seed in seeds {
        for &policy in &parsed {
            reports.push(execute_run(config, policy, seed)?.0);
        }
    }
    let aggregates = aggregate_reports(&reports).map_err(runtime_err)?;
    let csv = comparison_csv(&aggregates);
    let path = config.out_dir.join("compare.csv");
    std::fs::write(&path, &csv).map_err(runtime_err)?;
    println!(
        "compared {} policies x {} seeds ({} runs) -> {}",
        parsed.len(),
        seeds.len(),
        reports.len(),
        path.display()
    );
    print!("{csv}");
    Ok(path)
}

/// Recomputes the summary from a per-task CSV; with a stored summary it
/// verifies the reproduction is exact.
pub fn cmd_report(log: &Path, summary: Option<&Path>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(log)
        .map_err(|e| config_err(format!("cannot read log {}: {e}", log.display())))?;
    let rows = log_from_csv(&text).map_err(runtime_err)?;
    match summary {
        Some(path) => {
            let stored: RunSummary = serde_json::from_str(
                &std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read summary: {e}")))?,
            )
            .map_err(|e| runtime_err(format!("cannot parse summary: {e}")))?;
            let recomputed =
                report_from_rows(&rows, stored.report.context, stored.report.meta.clone())
                    .map_err(runtime_err)?;
            if recomputed != stored.report {
                return Err(runtime_err(
                    "recomputed report differs from the stored summary",
                ));
            }
            println!(
                "log reproduces the stored summary exactly ({} tasks, mean response {:.3}s)",
                recomputed.arrived, recomputed.mean_response
            );
        }
        None => {
            let horizon = rows.iter().filter_map(|r| r.end).fold(0.0, f64::max);
            let meta = RunMeta {
                policy: "unknown".into(),
                seed: 0,
                config_fingerprint: String::new(),
                workload_fingerprint: String::new(),
                lexicon_version: String::new(),
            };
            let report = report_from_rows(
                &rows,
                LogContext {
                    horizon,
                    cpu_lanes: 4,
                },
                meta,
            )
            .map_err(runtime_err)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
        }
    }
    Ok(())
}

/// Writes a synthetic trace with `n` records.
pub fn cmd_synth_trace(n: usize, seed: u64, tail_boost: f64, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(config_err("n must be positive"));
    }
    if !(0.0..=1.0).contains(&tail_boost) {
        return Err(config_err("tail-boost must lie in [0, 1]"));
    }
    let records = synth_trace(&SynthConfig {
        tail_boost,
        ..SynthConfig::new(n, seed)
    });
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime_err)?;
        }
    }
    save_trace(out, &records).map_err(runtime_err)?;
    // Quick shape summary so the user can sanity-check the generator.
    let mean_len: f64 =
        records.iter().map(|r| r.out_len as f64).sum::<f64>() / records.len() as f64;
    println!(
        "wrote {} records (mean output length {:.1} tokens) -> {}",
        records.len(),
        mean_len,
        out.display()
    );
    Ok(())
}
