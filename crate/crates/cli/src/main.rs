//! `smoothmech` experiment runner.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on
//! usage, IO, schema or size-cap errors.

mod config;
mod output;
mod pipelines;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smoothmech", version, about = "Smoothness certificates and equilibrium experiments for auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// replaces every seed in the config
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify smoothness over valuation profiles
    Certify(RunArgs),
    /// Fit the largest λ supported by mixed grid deviations
    Fit(RunArgs),
    /// Extremal correlated equilibria via LP
    Ce(RunArgs),
    /// Swap-regret learning against the LP bound
    Learn(RunArgs),
    /// Bayes-Nash best response and bluffing deviations
    Bayes(RunArgs),
    /// Effective-welfare bound with budgets
    Budget(RunArgs),
    /// Certificates and min-CE bounds for composed mechanisms
    Compose(RunArgs),
    /// Valuation class audits
    Valuations(RunArgs),
    /// Weak certificates and bounds across hybrid auctions
    HybridSweep(RunArgs),
}

type Pipeline = fn(&config::ExperimentConfig) -> Result<pipelines::Report>;

fn run(cli: Cli) -> Result<bool> {
    let (name, args, pipeline): (&str, &RunArgs, Pipeline) = match &cli.command {
        Command::Certify(a) => ("certify", a, pipelines::certify_cmd),
        Command::Fit(a) => ("fit", a, pipelines::fit_cmd),
        Command::Ce(a) => ("ce", a, pipelines::ce_cmd),
        Command::Learn(a) => ("learn", a, pipelines::learn_cmd),
        Command::Bayes(a) => ("bayes", a, pipelines::bayes_cmd),
        Command::Budget(a) => ("budget", a, pipelines::budget_cmd),
        Command::Compose(a) => ("compose", a, pipelines::compose_cmd),
        Command::Valuations(a) => ("valuations", a, pipelines::valuations_cmd),
        Command::HybridSweep(a) => ("hybrid-sweep", a, pipelines::hybrid_sweep_cmd),
    };
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global().context("starting the thread pool")?;
    }
    let mut cfg = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    let report = pipeline(&cfg)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json = args.out.join(cfg.outputs.json.clone().unwrap_or_else(|| format!("{name}.json")));
    let csv = args.out.join(cfg.outputs.csv.clone().unwrap_or_else(|| format!("{name}.csv")));
    let doc = serde_json::json!({ "command": name, "passed": report.passed, "result": report.json });
    output::write_json(&json, &doc)?;
    report.table.write(&csv)?;
    println!("{name}: {} ({}, {})", if report.passed { "pass" } else { "FAIL" }, json.display(), csv.display());
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
