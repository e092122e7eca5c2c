//! `swmix`: config-driven experiments with Swendsen-Wang and Gibbs chains.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "swmix", version, about = "Swendsen-Wang and Gibbs experiments on partitioned Ising models")]
struct Cli {
    /// JSON config, or an output file of a previous run.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured graph as an edge list (graph.txt).
    Generate,
    /// Run one chain and record states (samples.txt, sample_summary.csv).
    Sample,
    /// Coalescence sweep over bipartite sizes (mix.csv).
    Mix,
    /// Fixed points of the simplified map over a (B, k) grid (fixedpoint.csv).
    Fixedpoint,
    /// Contrastive divergence with each configured chain (learn.csv).
    Learn,
    /// Sample models, learn them with both chains and summarize the errors
    /// (reproduce.csv, reproduce_models.csv).
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Models per sweep point.
    #[arg(long)]
    models: Option<usize>,
    /// Largest graph size allowed.
    #[arg(long)]
    max_n: Option<usize>,
}

fn run(cli: Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::Reproduce(args) = &cli.command {
        if let Some(m) = args.models {
            config.reproduce.models_per_point = m;
        }
        if let Some(n) = args.max_n {
            config.reproduce.max_n = n;
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs >= 1, "--jobs must be at least 1");
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build()?;
    let ctx = Context { config, out: cli.out };
    pool.install(|| match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Sample => commands::sample(&ctx),
        Command::Mix => commands::mix(&ctx),
        Command::Fixedpoint => commands::fixedpoint(&ctx),
        Command::Learn => commands::learn(&ctx),
        Command::Reproduce(_) => commands::reproduce(&ctx),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some points did not complete");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
