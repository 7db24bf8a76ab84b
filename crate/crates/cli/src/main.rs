use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use tlbo::{Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(version, about = "Transfer-learning Bayesian optimisation experiments")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parallel worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run standard BO on every task to produce the historic datasets.
    GenerateHistoric,
    /// Run every (method, task, seed) cell, skipping completed ones.
    Run,
    /// Export regret, rank, overlap and cluster tables.
    Analyze,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let Some(path) = &cli.config else {
        bail!("--config is required");
    };
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        config.master_seed = s;
    }
    let out = config.output_dir(cli.out.as_deref())?;
    let exp = Experiment::new(config, out, cli.workers);
    match cli.command {
        Command::GenerateHistoric => {
            let files = exp.generate_historic()?;
            log::info!("wrote {} historic datasets under {}", files.len(), exp.out.display());
        }
        Command::Run => {
            let s = exp.run()?;
            log::info!("{} cells run, {} skipped, {} failed", s.executed, s.skipped, s.failed.len());
            if !s.failed.is_empty() {
                bail!("{} cells failed: {}", s.failed.len(), s.failed.join(", "));
            }
        }
        Command::Analyze => {
            for p in exp.analyze()? {
                log::info!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
