use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use pegreserve_core::harness::{emit_reports, run_experiment_with_workers, ExperimentConfig, WORKERS_ENV};
use pegreserve_core::oracle::run_oracles;
use pegreserve_core::{PolicyKind, ScenarioId};

#[derive(Parser)]
#[command(name = "pegreserve", version, about = "Stablecoin reserve stress-testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write reports.
    Run {
        /// Flat JSON config; omitted keys take the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario id or `all`.
        #[arg(long, default_value = "all")]
        scenario: String,
        /// Policy tag or `all`.
        #[arg(long, default_value = "all")]
        policy: String,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the brute-force reference checks.
    Oracle {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn select<T: Copy + std::str::FromStr>(arg: &str, all: &[T]) -> anyhow::Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    if arg == "all" {
        Ok(all.to_vec())
    } else {
        Ok(vec![arg.parse::<T>()?])
    }
}

fn workers() -> anyhow::Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .parse()
                .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be >= 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    scenario: &str,
    policy: &str,
    replicas: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> anyhow::Result<bool> {
    let mut cfg = match &config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.scenarios = select(scenario, &ScenarioId::ALL)?;
    cfg.policies = select(policy, &PolicyKind::ALL)?;
    if let Some(n) = replicas {
        cfg.replicas = n;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    cfg.validate()?;

    let report = run_experiment_with_workers(&cfg, workers()?)?;
    let files = emit_reports(&report, &dir)?;

    println!(
        "{:<22} {:<15} {:>14} {:>8} {:>10} {:>7}",
        "scenario", "policy", "revenue", "depeg", "resp_days", "failed"
    );
    for c in &report.cells {
        println!(
            "{:<22} {:<15} {:>14.4e} {:>8.3} {:>10} {:>7}",
            c.scenario.as_str(),
            c.policy.as_str(),
            c.mean_revenue,
            c.depeg_frequency,
            c.mean_responsiveness_days
                .map_or_else(|| "-".to_string(), |d| format!("{d:.2}")),
            c.failed
        );
    }
    for f in &report.failures {
        eprintln!(
            "failed: {} {} replica {}: {}",
            f.scenario, f.policy, f.replica, f.error
        );
    }
    println!("reports written to {}", files.summary.parent().unwrap_or(&dir).display());
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            scenario,
            policy,
            replicas,
            seed,
            out,
        } => run(config, &scenario, &policy, replicas, seed, out),
        Command::Oracle { seed } => {
            let results = run_oracles(seed);
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            Ok(results.iter().all(|r| r.passed))
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
