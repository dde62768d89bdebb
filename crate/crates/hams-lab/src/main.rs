//! `hams-lab`: benchmark CLI for the irreversible-Metropolis sampler toolkit.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use hams_lab::config::{Epsilon, FileConfig, RunConfig, SamplerKind, TargetSpec, WriteChains};
use hams_lab::experiment::run_experiment;
use hams_lab::tables::{match_table, theory_table};
use hams_lab::validate;

#[derive(Parser)]
#[command(
    name = "hams-lab",
    about = "Irreversible Metropolis sampler benchmarks: chains, tuning tables, matching reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampling experiment and emit chain/summary artifacts.
    Run(RunArgs),
    /// Closed-form tuning table over (epsilon, k, gamma) or a single a1.
    Theory(TheoryArgs),
    /// Integrator-vs-HAMS matching report.
    Match(MatchArgs),
    /// Standard-Gaussian invariant suites; exits nonzero on any failure.
    GaussianValidate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target: double-well | gaussian | sv | cox.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    sampler: Option<String>,
    /// Step size in (0,1), or "auto" to tune toward 70% acceptance.
    #[arg(long)]
    epsilon: Option<String>,
    /// Friction coefficient for the unpreconditioned flavors.
    #[arg(long)]
    eta: Option<f64>,
    /// k for the hams-k sampler.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Whiten the target by its approximate covariance (sv/cox).
    #[arg(long)]
    precondition: bool,
    /// Lift desk-scale limits (e.g. the 64x64 count grid).
    #[arg(long)]
    full: bool,
    /// Chain emission policy: all | first | none.
    #[arg(long)]
    write_chains: Option<String>,
    /// Gaussian target precision.
    #[arg(long)]
    gamma: Option<f64>,
    /// Gaussian target dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Double-well temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Series length for the volatility target.
    #[arg(long)]
    t_len: Option<usize>,
    /// Grid side for the count target.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    a1: Option<f64>,
    /// Step-size grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.2, 0.4])]
    epsilon: Vec<f64>,
    /// k grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 2.0, 3.0])]
    k: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// Integrator name or "all".
    #[arg(long, default_value = "all")]
    kind: String,
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn merge_run_config(args: &RunArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let pick = |flag: Option<&str>, key: &str| -> Option<String> {
        flag.map(str::to_string)
            .or_else(|| file.get(key).map(str::to_string))
    };

    let mut config = RunConfig::default();
    if let Some(s) = pick(args.sampler.as_deref(), "sampler") {
        config.sampler = SamplerKind::from_str(&s)?;
    }
    if let Some(k) = args.k.or_else(|| file.get("k").and_then(|v| v.parse().ok())) {
        if matches!(config.sampler, SamplerKind::HamsK(_)) {
            config.sampler = SamplerKind::HamsK(k);
        }
    }
    let target_name =
        pick(args.target.as_deref(), "target").unwrap_or_else(|| "double-well".into());
    let temperature = args
        .temperature
        .or_else(|| file.get("temperature").and_then(|v| v.parse().ok()))
        .unwrap_or(1.0);
    let gamma = args
        .gamma
        .or_else(|| file.get("gamma").and_then(|v| v.parse().ok()))
        .unwrap_or(1.0);
    let dim = args
        .dim
        .or_else(|| file.get("dim").and_then(|v| v.parse().ok()))
        .unwrap_or(1);
    let t_len = args
        .t_len
        .or_else(|| file.get("t_len").and_then(|v| v.parse().ok()))
        .unwrap_or(200);
    let m = args
        .m
        .or_else(|| file.get("m").and_then(|v| v.parse().ok()))
        .unwrap_or(16);
    config.target = match target_name.as_str() {
        "double-well" => TargetSpec::DoubleWell { temperature },
        "gaussian" => TargetSpec::Gaussian { gamma, dim },
        "sv" => TargetSpec::Sv { t_len },
        "cox" => TargetSpec::Cox { m },
        other => anyhow::bail!("unknown target {other:?}"),
    };
    if let Some(e) = pick(args.epsilon.as_deref(), "epsilon") {
        config.epsilon = Epsilon::from_str(&e)?;
    }
    if let Some(v) = args.eta.or_else(|| file.get("eta").and_then(|v| v.parse().ok())) {
        config.eta = v;
    }
    if let Some(v) = args.reps.or_else(|| file.get("reps").and_then(|v| v.parse().ok())) {
        config.n_reps = v;
    }
    if let Some(v) = args.draws.or_else(|| file.get("draws").and_then(|v| v.parse().ok())) {
        config.n_draws = v;
    }
    if let Some(v) = args.burnin.or_else(|| file.get("burnin").and_then(|v| v.parse().ok())) {
        config.n_burn = v;
    }
    if let Some(v) = args.seed.or_else(|| file.get("seed").and_then(|v| v.parse().ok())) {
        config.seed = v;
    }
    config.precondition = args.precondition
        || file.get("precondition").map(|v| v == "true" || v == "1") == Some(true);
    config.full = args.full || file.get("full").map(|v| v == "true" || v == "1") == Some(true);
    if let Some(v) = pick(args.write_chains.as_deref(), "write_chains") {
        config.write_chains = WriteChains::from_str(&v)?;
    }
    config.out_dir = args
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from));
    Ok(config)
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = merge_run_config(&args)?;
            let result = run_experiment(&config)?;
            println!("{}", serde_json::to_string_pretty(&result.summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Theory(args) => {
            let table = theory_table(args.gamma, args.a1, &args.epsilon, &args.k)?;
            emit(&table, args.out.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Match(args) => {
            let table = match_table(Some(&args.kind), args.epsilon, args.eta, args.gamma)?;
            emit(&table, args.out.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::GaussianValidate(args) => {
            let outcomes = validate::run_all(args.seed)?;
            let mut all_passed = true;
            for o in &outcomes {
                println!(
                    "[{}] {}: {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.detail
                );
                all_passed &= o.passed;
            }
            Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
