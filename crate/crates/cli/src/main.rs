use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use interpreg::Execution;
use interpreg_cli::{commands, ExperimentConfig, Output, RunSummary};

#[derive(Parser)]
#[command(
    name = "interpreg",
    version,
    about = "Interpretability-regularized kernel regression experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replaces every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write gnuplot scripts next to the CSVs.
    #[arg(long, global = true)]
    emit_gnuplot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample one dataset per (m, seed).
    Gen,
    /// Fit every (m, seed, lambda, tau) cell.
    Fit,
    /// Sweep the (lambda, tau) grid and extract the Pareto front.
    Sweep,
    /// Evaluate the sample-error bound, its inversion and equilibrium constants.
    Bounds,
    /// Check the spectral bounds on configured or random instances.
    Spectral,
    /// Decompose fits into sample and approximation error.
    Decompose,
}

fn execution(jobs: Option<usize>) -> Result<Execution> {
    match jobs {
        None => Ok(Execution::default()),
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("starting the worker pool")?;
            Ok(Execution::Parallel)
        }
    }
}

fn run(cli: &Cli) -> Result<RunSummary> {
    let path = cli.config.as_ref().context("--config is required")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    let exec = execution(cli.jobs)?;
    let out = Output::new(&config, cli.emit_gnuplot)?;
    match cli.command {
        Command::Gen => commands::gen(&config, &out, exec),
        Command::Fit => commands::fit(&config, &out, exec),
        Command::Sweep => commands::sweep(&config, &out, exec),
        Command::Bounds => commands::bounds(&config, &out, exec),
        Command::Spectral => commands::spectral(&config, &out, exec),
        Command::Decompose => commands::decompose(&config, &out, exec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            if summary.failures > 0 {
                eprintln!("{} row(s) failed", summary.failures);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
