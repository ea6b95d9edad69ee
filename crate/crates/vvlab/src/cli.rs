//! The `vvlab` command line: one executable running the full pipeline with
//! reproducible seeds and machine-readable outputs.
//!
//! Subcommands: `generate-data`, `fit-conformal`, `train`, `evaluate`,
//! `powerflow`, `oracle-compare`. Every run writes a `resolved_config.json`
//! next to its outputs; wall-clock fields live only in `manifest.json` so
//! primary outputs stay byte-identical across reruns of the same seed.
//!
//! Precedence for every setting: built-in default < `--config` file <
//! `VVLAB_SEED` (seed only) < explicit flag. Exit codes: 0 success,
//! 1 validation error, 2 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conformal::{
    build_interval_set, read_interval_set, write_interval_set, EnbpiParams, IntervalSet,
};
use crate::ddpg::{
    evaluate, train, ActionHead, EpisodeLog, GreedyPolicy, TrainConfig,
};
use crate::env::{channel_series, EnvConfig, FeatureLayout, VvEnv, STEPS_PER_DAY};
use crate::network::{build_admittance, load_network, Network};
use crate::nn::DenseNet;
use crate::oracle::{
    exhaustive_vvo, robust_exhaustive, ActionGrid, ScenarioBox, SnapshotInjections,
};
use crate::powerflow::{compute_losses, count_violations, solve, InjectionVector};
use crate::scenario::{
    generate, make_forecasts, read_forecast_set, read_time_series, write_forecast_set,
    write_time_series, ForecastSet, ScenarioConfig, TimeSeriesSet,
};

pub const TRUTH_FILE: &str = "truth.csv";
pub const FORECAST_FILE: &str = "forecast.csv";
pub const INTERVALS_FILE: &str = "intervals.csv";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const EVAL_LOG_FILE: &str = "eval_log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPARE_FILE: &str = "compare.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// A failure with its exit code semantics.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Validation(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "vvlab",
    version,
    about = "Volt-VAR optimization laboratory: seeded data generation, conformal intervals, robust DDPG training, and brute-force oracles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic load/PV truth and forecast series.
    GenerateData(GenerateArgs),
    /// Fit per-channel conformal models and write interval bounds.
    FitConformal(FitArgs),
    /// Train the robust DDPG agent.
    Train(TrainArgs),
    /// Evaluate a trained agent on the held-out days.
    Evaluate(EvaluateArgs),
    /// Solve one power-flow case from a network and injections file.
    Powerflow(PowerflowArgs),
    /// Compare a trained agent against the exhaustive oracles per timestep.
    OracleCompare(CompareArgs),
}

/// On-disk configuration mirroring the flag set; flags override file values.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub days: Option<usize>,
    pub train_fraction: Option<f64>,
    pub alpha: Option<f64>,
    pub scenario: ScenarioConfig,
    pub conformal: EnbpiParams,
    pub training: TrainConfig,
    pub env: EnvConfig,
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| invalid(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| invalid(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Ok(text) = std::env::var("VVLAB_SEED") {
        return text
            .parse()
            .map_err(|e| invalid(format!("VVLAB_SEED {text:?} is not an integer: {e}")));
    }
    cfg.seed
        .ok_or_else(|| invalid("no seed given: pass --seed, set VVLAB_SEED, or put \"seed\" in the config file"))
}

fn write_json<T: Serialize, P: AsRef<Path>>(path: P, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.as_ref().display())))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// generate-data
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Network file (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Output directory for truth.csv, forecast.csv, and the manifest.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Load noise as a fraction of the profile value.
    #[arg(long)]
    sigma_load: Option<f64>,
    /// Lognormal sigma of the PV irradiance factor.
    #[arg(long)]
    sigma_irradiance: Option<f64>,
    /// Forecast noise as a fraction of the true value.
    #[arg(long)]
    forecast_noise: Option<f64>,
}

#[derive(Serialize)]
struct GenerateResolved<'a> {
    network: String,
    days: usize,
    seed: u64,
    scenario: &'a ScenarioConfig,
}

#[derive(Serialize)]
struct GenerateManifest<'a> {
    #[serde(flatten)]
    resolved: GenerateResolved<'a>,
    created_unix: u64,
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_ref())?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let days = args.days.or(cfg.days).unwrap_or(20);
    if days == 0 {
        return Err(invalid("--days must be at least 1"));
    }
    let scenario = ScenarioConfig {
        sigma_load: args.sigma_load.unwrap_or(cfg.scenario.sigma_load),
        sigma_irradiance: args.sigma_irradiance.unwrap_or(cfg.scenario.sigma_irradiance),
        forecast_noise: args.forecast_noise.unwrap_or(cfg.scenario.forecast_noise),
    };
    let net = load_network(&args.network).map_err(invalid)?;
    std::fs::create_dir_all(&args.out_dir).map_err(runtime)?;

    let truth = generate(&net, days, seed, &scenario);
    // Forecast noise rides a derived stream so truth stays fixed as the
    // forecast quality is varied.
    let forecast = make_forecasts(&truth, scenario.forecast_noise, forecast_seed(seed));
    write_time_series(args.out_dir.join(TRUTH_FILE), &net, &truth).map_err(runtime)?;
    write_forecast_set(args.out_dir.join(FORECAST_FILE), &net, &forecast).map_err(runtime)?;

    let resolved = GenerateResolved {
        network: args.network.display().to_string(),
        days,
        seed,
        scenario: &scenario,
    };
    write_json(args.out_dir.join(RESOLVED_CONFIG_FILE), &resolved)?;
    write_json(
        args.out_dir.join(MANIFEST_FILE),
        &GenerateManifest {
            resolved,
            created_unix: unix_now(),
        },
    )?;
    println!(
        "generated {days} days ({} steps) for {} buses -> {}",
        truth.len(),
        net.n_buses(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn forecast_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x464f_5243)
}

// ---------------------------------------------------------------------------
// fit-conformal
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    network: PathBuf,
    /// Directory holding truth.csv; intervals.csv is written here too.
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Significance level of the intervals.
    #[arg(long)]
    alpha: Option<f64>,
    /// Ensemble size B.
    #[arg(long)]
    ensemble: Option<usize>,
    /// Lag order M.
    #[arg(long)]
    lag: Option<usize>,
    /// Residual window capacity T.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// Chronological train fraction used as the fitting span.
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Serialize)]
struct FitResolved {
    network: String,
    data_dir: String,
    seed: u64,
    alpha: f64,
    train_fraction: f64,
    split_at_step: usize,
    conformal: EnbpiParams,
}

/// Largest day-aligned index not exceeding `floor(fraction * len)`.
pub fn day_aligned_boundary(len: usize, fraction: f64) -> usize {
    let raw = (fraction * len as f64).floor() as usize;
    raw - raw % STEPS_PER_DAY
}

fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_ref())?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let alpha = args.alpha.or(cfg.alpha).unwrap_or(0.05);
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let params = EnbpiParams {
        ensemble_size: args.ensemble.unwrap_or(cfg.conformal.ensemble_size),
        lag: args.lag.unwrap_or(cfg.conformal.lag),
        window: args.window.unwrap_or(cfg.conformal.window),
        ridge_lambda: args.ridge_lambda.unwrap_or(cfg.conformal.ridge_lambda),
    };
    let fraction = args.train_fraction.or(cfg.train_fraction).unwrap_or(0.7);

    let net = load_network(&args.network).map_err(invalid)?;
    let truth = read_time_series(args.data_dir.join(TRUTH_FILE), &net).map_err(invalid)?;
    let split_at = day_aligned_boundary(truth.len(), fraction);
    if split_at <= params.lag + 10 {
        return Err(invalid(format!(
            "training span of {split_at} steps is too short for lag {}",
            params.lag
        )));
    }
    let channels = channel_series(&net, &truth);
    let set = build_interval_set(&channels, split_at, &params, alpha, seed).map_err(runtime)?;
    write_interval_set(args.data_dir.join(INTERVALS_FILE), &set, truth.start).map_err(runtime)?;
    write_json(
        args.data_dir.join(RESOLVED_CONFIG_FILE),
        &FitResolved {
            network: args.network.display().to_string(),
            data_dir: args.data_dir.display().to_string(),
            seed,
            alpha,
            train_fraction: fraction,
            split_at_step: split_at,
            conformal: params,
        },
    )?;
    println!(
        "fitted {} channels over {} training steps -> {}",
        set.n_channels(),
        split_at,
        args.data_dir.join(INTERVALS_FILE).display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    network: PathBuf,
    /// Directory holding truth.csv, forecast.csv, and intervals.csv.
    #[arg(long)]
    data_dir: PathBuf,
    /// Model output path; the JSON sidecar lands next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    pretrain_steps: Option<usize>,
    #[arg(long)]
    reward_scale: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    buffer_capacity: Option<usize>,
    /// Hidden layer sizes, comma separated, e.g. 30,40,80.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Ablation: train on zero-width intervals instead of the fitted ones.
    #[arg(long)]
    zero_width_intervals: bool,
    /// Ablation: critic targets from the online networks.
    #[arg(long)]
    literal_targets: bool,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ModelSidecar {
    pub format: String,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub n_caps: usize,
    pub n_inverters: usize,
    pub feature_len: usize,
    pub action_dim: usize,
    pub feature_layout: String,
    pub feature_layout_hash: String,
    pub training: TrainConfig,
    pub env: EnvConfig,
    pub alpha: f64,
    pub zero_width_intervals: bool,
    pub train_days: usize,
    pub test_days: usize,
}

pub fn layout_hash(layout: &FeatureLayout) -> String {
    let mut hasher = Sha256::new();
    hasher.update(layout.describe().as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Pipeline {
    net: Network,
    truth: TimeSeriesSet,
    forecast: ForecastSet,
    intervals: IntervalSet,
    train_days: Vec<usize>,
    test_days: Vec<usize>,
}

fn load_pipeline(
    network: &Path,
    data_dir: &Path,
    fraction: f64,
    zero_width: bool,
) -> Result<Pipeline, Failure> {
    let net = load_network(network).map_err(invalid)?;
    let truth = read_time_series(data_dir.join(TRUTH_FILE), &net).map_err(invalid)?;
    let forecast = read_forecast_set(data_dir.join(FORECAST_FILE), &net).map_err(invalid)?;
    let layout = FeatureLayout::for_network(&net);
    let intervals = if zero_width {
        IntervalSet::zero_width(layout.channel_names(&net), truth.len(), 0.05)
    } else {
        read_interval_set(data_dir.join(INTERVALS_FILE)).map_err(invalid)?
    };
    let boundary = day_aligned_boundary(truth.len(), fraction);
    let n_days = truth.len() / STEPS_PER_DAY;
    let split_day = boundary / STEPS_PER_DAY;
    let train_days: Vec<usize> = (0..split_day).collect();
    let test_days: Vec<usize> = (split_day..n_days).collect();
    Ok(Pipeline {
        net,
        truth,
        forecast,
        intervals,
        train_days,
        test_days,
    })
}

fn write_training_log(path: &Path, logs: &[EpisodeLog]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    w.write_record(["episode", "mean_reward", "critic_loss", "actor_objective", "buffer_fill"])
        .map_err(runtime)?;
    for log in logs {
        w.write_record([
            log.episode.to_string(),
            format!("{}", log.mean_reward),
            format!("{}", log.critic_loss),
            format!("{}", log.actor_objective),
            log.buffer_fill.to_string(),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_ref())?;
    let seed = resolve_seed(args.seed, &cfg)?;
    let fraction = args.train_fraction.or(cfg.train_fraction).unwrap_or(0.7);
    let hidden = match &args.hidden {
        None => cfg.training.hidden.clone(),
        Some(text) => text
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(format!("bad --hidden {text:?}: {e}")))?,
    };
    let train_cfg = TrainConfig {
        episodes: args.episodes.unwrap_or(cfg.training.episodes),
        gamma: args.gamma.unwrap_or(cfg.training.gamma),
        tau: args.tau.unwrap_or(cfg.training.tau),
        learning_rate: args.learning_rate.unwrap_or(cfg.training.learning_rate),
        noise_sigma: args.noise.unwrap_or(cfg.training.noise_sigma),
        pretrain_steps: args.pretrain_steps.unwrap_or(cfg.training.pretrain_steps),
        reward_scale: args.reward_scale.unwrap_or(cfg.training.reward_scale),
        batch_size: args.batch_size.unwrap_or(cfg.training.batch_size),
        buffer_capacity: args.buffer_capacity.unwrap_or(cfg.training.buffer_capacity),
        hidden,
        literal_targets: args.literal_targets || cfg.training.literal_targets,
        seed,
    };

    let pipeline = load_pipeline(
        &args.network,
        &args.data_dir,
        fraction,
        args.zero_width_intervals,
    )?;
    if pipeline.train_days.is_empty() {
        return Err(invalid("no full training days before the split boundary"));
    }
    let layout = FeatureLayout::for_network(&pipeline.net);
    let alpha = pipeline.intervals.alpha;
    let mut env = VvEnv::new(
        pipeline.net,
        cfg.env.clone(),
        pipeline.truth,
        pipeline.forecast,
        pipeline.intervals,
    )
    .map_err(invalid)?;

    let (agent, logs) = train(&mut env, &pipeline.train_days, &train_cfg).map_err(runtime)?;

    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(runtime)?;
        }
    }
    agent.actor.save(&args.out).map_err(runtime)?;
    let sidecar = ModelSidecar {
        format: "vvlab-model/1".to_string(),
        seed,
        hidden: train_cfg.hidden.clone(),
        n_caps: layout.n_caps,
        n_inverters: layout.n_inverters,
        feature_len: layout.adversarial_len(),
        action_dim: agent.head.dim(),
        feature_layout: layout.describe(),
        feature_layout_hash: layout_hash(&layout),
        training: train_cfg.clone(),
        env: cfg.env.clone(),
        alpha,
        zero_width_intervals: args.zero_width_intervals,
        train_days: pipeline.train_days.len(),
        test_days: pipeline.test_days.len(),
    };
    write_json(sidecar_path(&args.out), &sidecar)?;
    let log_path = args
        .out
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(TRAINING_LOG_FILE);
    write_training_log(&log_path, &logs)?;
    write_json(
        args.out
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(RESOLVED_CONFIG_FILE),
        &sidecar,
    )?;
    let last = logs.last().map(|l| l.mean_reward).unwrap_or(0.0);
    println!(
        "trained {} episodes on {} days; final mean reward {last:.4} -> {}",
        train_cfg.episodes,
        pipeline.train_days.len(),
        args.out.display()
    );
    Ok(())
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output directory; defaults to the data directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Serialize)]
struct EvalMetrics {
    days: usize,
    steps: usize,
    mean_reward: f64,
    mean_loss_mw: f64,
    std_loss_mw: f64,
    vvr: f64,
}

#[derive(Serialize)]
struct EvalManifest {
    created_unix: u64,
    mean_decision_ms: f64,
}

fn load_policy(model: &Path, layout: &FeatureLayout) -> Result<(GreedyPolicy, ModelSidecar), Failure> {
    let sidecar_text = std::fs::read_to_string(sidecar_path(model))
        .map_err(|e| invalid(format!("cannot read sidecar {}: {e}", sidecar_path(model).display())))?;
    let sidecar: ModelSidecar = serde_json::from_str(&sidecar_text)
        .map_err(|e| invalid(format!("bad sidecar: {e}")))?;
    if sidecar.feature_layout_hash != layout_hash(layout) {
        return Err(invalid(format!(
            "model was trained for a different feature layout\n  model: {}\n  network: {}",
            sidecar.feature_layout,
            layout.describe()
        )));
    }
    let actor = DenseNet::load(model).map_err(invalid)?;
    let policy = GreedyPolicy {
        actor,
        head: ActionHead {
            n_sigmoid: 1 + sidecar.n_caps,
            n_tanh: sidecar.n_inverters,
        },
    };
    Ok((policy, sidecar))
}

fn write_eval_log(
    path: &Path,
    report: &crate::ddpg::EvalReport,
    n_inverters: usize,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    let mut header = vec![
        "timestep".to_string(),
        "reward".to_string(),
        "p_loss_mw".to_string(),
        "violations".to_string(),
        "switches".to_string(),
        "converged".to_string(),
        "tap".to_string(),
        "cap_states".to_string(),
    ];
    header.extend((0..n_inverters).map(|k| format!("q_dg_{k}")));
    w.write_record(&header).map_err(runtime)?;
    for (reward, info) in crate::ddpg::step_infos(report) {
        let caps: String = info.caps.iter().map(|&c| if c { '1' } else { '0' }).collect();
        let mut row = vec![
            info.t.to_string(),
            format!("{reward}"),
            format!("{}", info.p_loss_mw),
            info.violations.to_string(),
            info.switches.to_string(),
            info.converged.to_string(),
            info.tap.to_string(),
            caps,
        ];
        row.extend(info.q_dg_kvar.iter().map(|q| format!("{q}")));
        w.write_record(&row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_ref())?;
    let fraction = args.train_fraction.or(cfg.train_fraction).unwrap_or(0.7);
    let pipeline = load_pipeline(&args.network, &args.data_dir, fraction, false)?;
    if pipeline.test_days.is_empty() {
        return Err(invalid("no held-out days after the split boundary"));
    }
    let layout = FeatureLayout::for_network(&pipeline.net);
    let (policy, sidecar) = load_policy(&args.model, &layout)?;
    let n_inverters = layout.n_inverters;
    let mut env = VvEnv::new(
        pipeline.net,
        sidecar.env.clone(),
        pipeline.truth,
        pipeline.forecast,
        pipeline.intervals,
    )
    .map_err(invalid)?;
    let report = evaluate(&policy, &mut env, &pipeline.test_days).map_err(runtime)?;

    let out_dir = args.out_dir.clone().unwrap_or_else(|| args.data_dir.clone());
    std::fs::create_dir_all(&out_dir).map_err(runtime)?;
    write_eval_log(&out_dir.join(EVAL_LOG_FILE), &report, n_inverters)?;
    write_json(
        out_dir.join(METRICS_FILE),
        &EvalMetrics {
            days: pipeline.test_days.len(),
            steps: report.metrics.steps(),
            mean_reward: report.mean_reward,
            mean_loss_mw: report.mean_loss_mw,
            std_loss_mw: report.std_loss_mw,
            vvr: report.vvr,
        },
    )?;
    write_json(
        out_dir.join(MANIFEST_FILE),
        &EvalManifest {
            created_unix: unix_now(),
            mean_decision_ms: report.mean_decision_ms,
        },
    )?;
    write_json(out_dir.join(RESOLVED_CONFIG_FILE), &sidecar)?;
    println!(
        "evaluated {} days: mean reward {:.4}, mean loss {:.4} MW, VVR {:.5}",
        pipeline.test_days.len(),
        report.mean_reward,
        report.mean_loss_mw,
        report.vvr
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// powerflow
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct PowerflowArgs {
    #[arg(long)]
    network: PathBuf,
    /// CSV with columns bus_id, p_kw, q_kvar of net injections.
    #[arg(long)]
    injections: PathBuf,
    /// Reference (slack) voltage in per-unit.
    #[arg(long, default_value_t = 1.0)]
    v_ref: f64,
    /// Solution CSV path.
    #[arg(long, default_value = "solution.csv")]
    out: PathBuf,
}

fn read_injections(path: &Path, net: &Network) -> Result<InjectionVector, Failure> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut inj = InjectionVector::zeros(net.n_buses());
    let base_kw = net.base_mva * 1000.0;
    for record in reader.records() {
        let record = record.map_err(invalid)?;
        if record.len() != 3 {
            return Err(invalid(format!(
                "{}: expected 3 columns bus_id,p_kw,q_kvar",
                path.display()
            )));
        }
        let id: u32 = record[0]
            .parse()
            .map_err(|e| invalid(format!("bad bus id {:?}: {e}", &record[0])))?;
        let idx = net
            .bus_index(id)
            .ok_or_else(|| invalid(format!("unknown bus id {id}")))?;
        let p: f64 = record[1].parse().map_err(invalid)?;
        let q: f64 = record[2].parse().map_err(invalid)?;
        inj.p[idx] = p / base_kw;
        inj.q[idx] = q / base_kw;
    }
    Ok(inj)
}

fn cmd_powerflow(args: &PowerflowArgs) -> Result<(), Failure> {
    if !(0.8..=1.2).contains(&args.v_ref) {
        return Err(invalid(format!(
            "--v-ref {} outside [0.8, 1.2] p.u.",
            args.v_ref
        )));
    }
    let net = load_network(&args.network).map_err(invalid)?;
    let inj = read_injections(&args.injections, &net)?;
    let y = build_admittance(&net, &vec![false; net.capacitors.len()]).map_err(runtime)?;
    let sol = solve(&y, &inj, args.v_ref);

    let mut w = csv::Writer::from_path(&args.out).map_err(runtime)?;
    w.write_record(["bus_id", "v_pu", "theta_rad"]).map_err(runtime)?;
    for (i, bus) in net.buses.iter().enumerate() {
        w.write_record([
            bus.id.to_string(),
            format!("{}", sol.v[i]),
            format!("{}", sol.theta[i]),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(runtime)?;
    write_json(
        args.out
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(RESOLVED_CONFIG_FILE),
        &serde_json::json!({
            "network": args.network.display().to_string(),
            "injections": args.injections.display().to_string(),
            "v_ref": args.v_ref,
            "out": args.out.display().to_string(),
        }),
    )?;

    if sol.converged {
        let losses = compute_losses(&net, &sol).map_err(runtime)?;
        let violations = count_violations(&sol, 0.95, 1.05);
        println!(
            "converged in {} iterations: p_loss_mw={} q_loss_mvar={} violations={}",
            sol.iterations, losses.p_loss_mw, losses.q_loss_mvar, violations
        );
    } else {
        println!(
            "did not converge after {} iterations: max_mismatch={}",
            sol.iterations, sol.max_mismatch
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle-compare
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output CSV path; defaults to data_dir/compare.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Oracle taps span -tap_span..=tap_span stepped by tap_step.
    #[arg(long, default_value_t = 8)]
    tap_span: i32,
    #[arg(long, default_value_t = 2)]
    tap_step: i32,
    /// Reactive levels per inverter.
    #[arg(long, default_value_t = 5)]
    q_levels: usize,
    /// Limit the comparison to the first N test days.
    #[arg(long)]
    max_days: Option<usize>,
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let cfg = load_config(args.config.as_ref())?;
    let fraction = args.train_fraction.or(cfg.train_fraction).unwrap_or(0.7);
    let pipeline = load_pipeline(&args.network, &args.data_dir, fraction, false)?;
    if pipeline.test_days.is_empty() {
        return Err(invalid("no held-out days after the split boundary"));
    }
    let layout = FeatureLayout::for_network(&pipeline.net);
    let (policy, sidecar) = load_policy(&args.model, &layout)?;
    if args.tap_step <= 0 || args.tap_span < 0 {
        return Err(invalid("--tap-step must be positive and --tap-span nonnegative"));
    }
    let taps: Vec<i32> = (-args.tap_span..=args.tap_span)
        .step_by(args.tap_step as usize)
        .collect();
    let grid = ActionGrid {
        taps,
        n_caps: layout.n_caps,
        q_levels: args.q_levels,
    };

    let net = pipeline.net.clone();
    let truth = pipeline.truth.clone();
    let env_cfg = sidecar.env.clone();
    let mut env = VvEnv::new(
        pipeline.net,
        env_cfg.clone(),
        pipeline.truth,
        pipeline.forecast,
        pipeline.intervals,
    )
    .map_err(invalid)?;

    let days: Vec<usize> = match args.max_days {
        None => pipeline.test_days.clone(),
        Some(n) => pipeline.test_days.iter().copied().take(n).collect(),
    };

    let out_path = args
        .out
        .clone()
        .unwrap_or_else(|| args.data_dir.join(COMPARE_FILE));
    let mut w = csv::Writer::from_path(&out_path).map_err(runtime)?;
    w.write_record([
        "timestep",
        "oracle_objective",
        "agent_objective",
        "gap",
        "robust_oracle_objective",
    ])
    .map_err(runtime)?;

    for &day in &days {
        let mut state = env.reset(day).map_err(runtime)?;
        loop {
            let t = env.timestep();
            let snap = SnapshotInjections {
                load_p_kw: truth.load_p[t].clone(),
                load_q_kvar: truth.load_q[t].clone(),
                pv_kw: truth.pv[t].clone(),
            };
            let (oracle_action, oracle_obj) =
                exhaustive_vvo(&net, &snap, &grid, &env_cfg).map_err(runtime)?;
            let _ = oracle_action;

            let boxed = scenario_box_at(&net, &env, &snap, t);
            let (_, robust_obj) =
                robust_exhaustive(&net, &boxed, &grid, &env_cfg).map_err(runtime)?;

            let ctx = env.action_context();
            let action = policy.act(&state.features(), &ctx);
            let outcome = env.step(&action).map_err(runtime)?;
            // The agent's objective is its realized loss and violation cost
            // at this step; switching cost stays out on both sides.
            let agent_obj = if outcome.info.converged {
                env_cfg.c_p * outcome.info.p_loss_mw + env_cfg.c_v * outcome.info.violations as f64
            } else {
                f64::INFINITY
            };
            w.write_record([
                t.to_string(),
                format!("{oracle_obj}"),
                format!("{agent_obj}"),
                format!("{}", agent_obj - oracle_obj),
                format!("{robust_obj}"),
            ])
            .map_err(runtime)?;
            match outcome.next {
                Some(s) => state = s,
                None => break,
            }
        }
    }
    w.flush().map_err(runtime)?;
    write_json(
        args.data_dir.join(RESOLVED_CONFIG_FILE),
        &serde_json::json!({
            "network": args.network.display().to_string(),
            "model": args.model.display().to_string(),
            "tap_span": args.tap_span,
            "tap_step": args.tap_step,
            "q_levels": args.q_levels,
            "days": days,
        }),
    )?;
    println!("wrote per-step oracle comparison -> {}", out_path.display());
    Ok(())
}

/// Uncertainty box for the robust oracle at a timestep, built from the same
/// forecast-centered channel intervals the agent observes.
fn scenario_box_at(
    net: &Network,
    env: &VvEnv,
    nominal: &SnapshotInjections,
    t: usize,
) -> ScenarioBox {
    let intervals = env.channel_intervals_at(t);
    let n_load = net.n_buses() - 1;
    let load_p_bounds = intervals[..n_load]
        .iter()
        .map(|iv| (iv.lower.max(0.0), iv.upper))
        .collect();
    let pv_bounds = intervals[n_load..]
        .iter()
        .map(|iv| (iv.lower.max(0.0), iv.upper))
        .collect();
    ScenarioBox {
        nominal: nominal.clone(),
        load_p_bounds,
        pv_bounds,
        grouped: true,
    }
}

// ---------------------------------------------------------------------------

/// Parses and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenerateData(args) => cmd_generate(args),
        Command::FitConformal(args) => cmd_fit(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Powerflow(args) => cmd_powerflow(args),
        Command::OracleCompare(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            failure.code()
        }
    }
}
