//! `nsdb`: run dueling bandit policies on changing preference sequences and
//! write reproducible artifacts.
//!
//! Exit codes: 0 success, 1 invalid config or usage, 2 environment fails
//! validation (for example no winner at some round), 3 internal measure
//! ordering violation.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use nsdb::harness::{self, PolicySpec, RunError, SweepEnv};
use nsdb::prefs::PreferenceSequence;

use config::{ConfigError, EnvSpec, ExperimentConfig, LoadedConfig, SCHEMA_VERSION};
use output::ArtifactDir;

#[derive(Parser)]
#[command(
    name = "nsdb",
    version,
    about = "Simulator for dueling bandit policies under changing preferences"
)]
struct Cli {
    /// Cap worker threads for parallel seed execution (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured policy on one environment; write per-seed artifacts.
    Run(RunArgs),
    /// Run the policy across a labeled environment grid; fit regret scaling.
    Sweep(RunArgs),
    /// Print the configured environment's non-stationarity measures as JSON.
    Measures(BaseArgs),
    /// Monte Carlo check of the estimator deviation bound; write a summary.
    Concentration(ConcentrationArgs),
    /// Parse and check a config without running anything.
    Validate(BaseArgs),
}

#[derive(Args)]
struct BaseArgs {
    /// Path to the JSON experiment config.
    config: PathBuf,
    /// Override the config's horizon.
    #[arg(long, value_name = "T")]
    horizon: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Override the config's first seed.
    #[arg(long, value_name = "SEED")]
    base_seed: Option<u64>,
    /// Override the config's seed count; seeds are base_seed..base_seed+N.
    #[arg(long, value_name = "N")]
    num_seeds: Option<usize>,
    /// Output directory (overrides ANACONDA_OUT and the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[command(flatten)]
    base: BaseArgs,
    /// Override the config's deviation-bound constant.
    #[arg(long, value_name = "C1")]
    c1: Option<f64>,
    /// Override the config's trial count.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Override the config's first seed.
    #[arg(long, value_name = "SEED")]
    base_seed: Option<u64>,
    /// Output directory (overrides ANACONDA_OUT and the config).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

enum CliError {
    /// Exit 1: the config or invocation is wrong.
    Usage(String),
    /// Exit 2: the environment itself fails validation.
    Env(String),
    /// Exit 3: a computed measure report violates its own ordering laws.
    Ordering(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(msg) => CliError::Usage(msg),
            ConfigError::Env(e) => CliError::Env(e.to_string()),
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Prefs(e) => CliError::Env(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Must precede first rayon use; a repeat initialization would error.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Measures(args) => cmd_measures(args),
        Command::Concentration(args) => cmd_concentration(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Env(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Ordering(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Output directory precedence: `--out` flag, then `ANACONDA_OUT`, then the
/// config's `output_dir`, then `./out`.
fn resolve_out(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os("ANACONDA_OUT").map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn require_env(cfg: &ExperimentConfig, cmd: &str) -> Result<EnvSpec, CliError> {
    cfg.env
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{cmd} needs an `env` in the config")))
}

fn require_policy(cfg: &ExperimentConfig, cmd: &str) -> Result<PolicySpec, CliError> {
    cfg.policy
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{cmd} needs a `policy` in the config")))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, sha256 } = config::load_config(&args.base.config)?;
    let horizon = args.base.horizon.unwrap_or(cfg.horizon);
    let base_seed = args.base_seed.unwrap_or(cfg.base_seed);
    let num_seeds = args.num_seeds.unwrap_or(cfg.num_seeds);
    if num_seeds == 0 {
        return Err(CliError::Usage("num_seeds must be at least 1".into()));
    }
    let env = require_env(&cfg, "run")?.build(horizon)?;
    let policy = require_policy(&cfg, "run")?;
    let mut dir = ArtifactDir::new(resolve_out(args.out, &cfg));

    let seeds: Vec<u64> = (0..num_seeds as u64).map(|i| base_seed + i).collect();
    let records = seeds
        .par_iter()
        .map(|&seed| harness::run_single(&env, &policy, seed))
        .collect::<Result<Vec<_>, RunError>>()?;

    dir.write_json(
        "measures.json",
        &output::MeasuresDoc {
            schema_version: SCHEMA_VERSION,
            horizon,
            arms: env.arms(),
            report: &env.measure_report(),
        },
    )?;
    for rec in &records {
        let sub = format!("seed-{:05}", rec.seed);
        dir.write(&format!("{sub}/regret.csv"), &output::regret_csv(rec))?;
        dir.write(&format!("{sub}/trace.csv"), &output::trace_csv(&rec.trace))?;
        dir.write_json(
            &format!("{sub}/run.json"),
            &output::run_sidecar(rec, horizon, env.arms()),
        )?;
    }
    let mean = records.iter().map(|r| r.total_regret()).sum::<f64>() / num_seeds as f64;
    let root = dir.root().display().to_string();
    dir.finish("run", &sha256)?;
    println!("run: {num_seeds} seeds, horizon {horizon}, mean regret {mean:.2}, artifacts in {root}");
    Ok(())
}

fn cmd_sweep(args: RunArgs) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, sha256 } = config::load_config(&args.base.config)?;
    let horizon = args.base.horizon.unwrap_or(cfg.horizon);
    let base_seed = args.base_seed.unwrap_or(cfg.base_seed);
    let num_seeds = args.num_seeds.unwrap_or(cfg.num_seeds);
    let specs = cfg
        .envs
        .clone()
        .ok_or_else(|| CliError::Usage("sweep needs an `envs` grid in the config".into()))?;
    if specs.is_empty() {
        return Err(CliError::Usage("`envs` must not be empty".into()));
    }
    let policy = require_policy(&cfg, "sweep")?;
    let mut envs = Vec::with_capacity(specs.len());
    for spec in &specs {
        let env = spec.env.build(horizon).map_err(|e| match e {
            ConfigError::Invalid(msg) => {
                CliError::Usage(format!("env `{}`: {msg}", spec.label))
            }
            ConfigError::Env(err) => CliError::Env(format!("env `{}`: {err}", spec.label)),
        })?;
        envs.push(SweepEnv { label: spec.label.clone(), env });
    }
    let result = harness::run_sweep(&envs, &policy, base_seed, num_seeds)?;
    let mut dir = ArtifactDir::new(resolve_out(args.out, &cfg));
    dir.write_json(
        "sweep.json",
        &output::SweepDoc {
            schema_version: SCHEMA_VERSION,
            config_sha256: &sha256,
            horizon,
            base_seed,
            num_seeds,
            result: &result,
        },
    )?;
    let root = dir.root().display().to_string();
    dir.finish("sweep", &sha256)?;
    let slope = result
        .slope_vs_switches
        .map_or_else(|| "n/a".into(), |s| format!("{s:.3}"));
    println!(
        "sweep: {} cells x {num_seeds} seeds, slope vs switches {slope}, artifacts in {root}",
        result.cells.len()
    );
    Ok(())
}

fn cmd_measures(args: BaseArgs) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, .. } = config::load_config(&args.config)?;
    let horizon = args.horizon.unwrap_or(cfg.horizon);
    let env = require_env(&cfg, "measures")?.build(horizon)?;
    let report = env.measure_report();
    // These orderings hold for every sequence; a violation is a bug worth a
    // distinct exit code rather than a quiet artifact.
    if report.sig_switches() > report.cw_switches || report.cw_switches > report.pref_switches {
        return Err(CliError::Ordering(format!(
            "switch counts out of order: significant {} / winner {} / matrix {}",
            report.sig_switches(),
            report.cw_switches,
            report.pref_switches
        )));
    }
    if report.cw_variation > report.total_variation {
        return Err(CliError::Ordering(format!(
            "winner variation {} exceeds total variation {}",
            report.cw_variation, report.total_variation
        )));
    }
    print!(
        "{}",
        output::json_doc(&output::MeasuresDoc {
            schema_version: SCHEMA_VERSION,
            horizon,
            arms: env.arms(),
            report: &report,
        })
    );
    Ok(())
}

fn cmd_concentration(args: ConcentrationArgs) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, sha256 } = config::load_config(&args.base.config)?;
    let horizon = args.base.horizon.unwrap_or(cfg.horizon);
    let base_seed = args.base_seed.unwrap_or(cfg.base_seed);
    let opts = cfg.concentration;
    let c1 = args
        .c1
        .or(opts.map(|o| o.c1))
        .ok_or_else(|| CliError::Usage("concentration needs `c1` (config or --c1)".into()))?;
    let trials = args
        .trials
        .or(opts.map(|o| o.trials))
        .ok_or_else(|| CliError::Usage("concentration needs `trials` (config or --trials)".into()))?;
    if !(c1.is_finite() && c1 >= 0.0) {
        return Err(CliError::Usage(format!("c1 must be finite and >= 0, got {c1}")));
    }
    if trials == 0 {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    if horizon < 2 {
        return Err(CliError::Usage("concentration needs horizon >= 2".into()));
    }
    let env = require_env(&cfg, "concentration")?.build(horizon)?;
    // The suite plays a fixed matrix; a drifting env contributes its round-1
    // matrix.
    let matrix = env.matrix_at(1);
    let summary = harness::concentration_suite(&matrix, horizon, c1, trials, base_seed);
    let mut dir = ArtifactDir::new(resolve_out(args.out, &cfg));
    dir.write_json(
        "concentration.json",
        &output::ConcentrationDoc {
            schema_version: SCHEMA_VERSION,
            config_sha256: &sha256,
            base_seed,
            summary: &summary,
        },
    )?;
    let root = dir.root().display().to_string();
    dir.finish("concentration", &sha256)?;
    println!(
        "concentration: {}/{} trials violated (frequency {}), artifacts in {root}",
        summary.violating_trials, summary.trials, summary.frequency
    );
    Ok(())
}

fn cmd_validate(args: BaseArgs) -> Result<(), CliError> {
    let LoadedConfig { config: cfg, .. } = config::load_config(&args.config)?;
    let horizon = args.horizon.unwrap_or(cfg.horizon);
    let mut built: Vec<(String, PreferenceSequence)> = Vec::new();
    if let Some(env) = &cfg.env {
        built.push(("env".into(), env.build(horizon)?));
    }
    if let Some(envs) = &cfg.envs {
        for spec in envs {
            let env = spec.env.build(horizon).map_err(|e| match e {
                ConfigError::Invalid(msg) => {
                    CliError::Usage(format!("env `{}`: {msg}", spec.label))
                }
                ConfigError::Env(err) => CliError::Env(format!("env `{}`: {err}", spec.label)),
            })?;
            built.push((format!("env `{}`", spec.label), env));
        }
    }
    if built.is_empty() {
        return Err(CliError::Usage("config has neither `env` nor `envs`".into()));
    }
    if let Some(policy) = &cfg.policy {
        // Constructing the policy runs its own config validation.
        harness::build_policy(policy, &built[0].1, cfg.base_seed, false)?;
    }
    if let Some(opts) = cfg.concentration {
        if !(opts.c1.is_finite() && opts.c1 >= 0.0) {
            return Err(CliError::Usage(format!(
                "concentration.c1 must be finite and >= 0, got {}",
                opts.c1
            )));
        }
        if opts.trials == 0 {
            return Err(CliError::Usage("concentration.trials must be at least 1".into()));
        }
    }
    let arms: Vec<String> = built.iter().map(|(n, e)| format!("{n} ({} arms)", e.arms())).collect();
    println!(
        "ok: horizon {horizon}, {}; policy {}",
        arms.join(", "),
        if cfg.policy.is_some() { "checked" } else { "absent" }
    );
    Ok(())
}
