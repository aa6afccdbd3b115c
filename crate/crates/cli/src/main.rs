use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use offset_risk::commands::{run_command, Format, Outputs};
use offset_risk::config::{Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "offset-risk", version, about = "Offset-condition estimators, complexities and their empirical checks")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON configuration file; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Artifact kinds to write; repeatable. All kinds when omitted.
    #[arg(long, value_enum)]
    format: Vec<Format>,
    /// Replicates per cell (overrides the configuration).
    #[arg(long)]
    replicates: Option<usize>,
}

fn run(cli: Cli) -> Result<bool> {
    if let Ok(threads) = std::env::var("OFFSET_RISK_THREADS") {
        let threads: usize = threads.parse().context("OFFSET_RISK_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.replicates {
        cfg.replicates = r;
    }
    cfg.command = Some(cli.command);
    cfg.validate()?;
    let report = run_command(cli.command, &cfg, &cli.out, &Outputs { formats: cli.format })?;
    for f in &report.files {
        println!("{}", cli.out.join(f).display());
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
