use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use metasel_cli::commands;
use metasel_cli::pipeline::Method;
use metasel_cli::{ExitKind, RunConfig};

/// Metadata-driven data selection.
///
/// Exit codes: 0 success, 1 config or input error, 2 extraction produced no
/// samples, 3 training failure.
#[derive(Parser)]
#[command(name = "metasel", version)]
struct Cli {
    /// Run configuration (JSON). Relative paths inside it are resolved
    /// against its directory.
    #[arg(long, global = true, env = "METASEL_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true, env = "METASEL_SEED")]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true, env = "METASEL_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "METASEL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// GPS traces to per-sample metadata (fixture or Overpass provider).
    Extract,
    /// Synthetic corpus, its profile and a random target.
    Synth,
    /// Train the scoring network and write a checkpoint.
    Train,
    /// Select a subset and write its manifest and reports.
    Select {
        #[arg(long, value_enum, default_value = "trained")]
        method: Method,
        /// Load the configured checkpoint instead of retraining when it
        /// matches this config and corpus.
        #[arg(long)]
        reuse_checkpoint: bool,
    },
    /// Re-score manifests against the corpus and target.
    Evaluate,
    /// Train and select over a grid of keep ratios and targets.
    Sweep,
    /// Trained selection next to the random and surrogate baselines.
    Report {
        #[arg(long)]
        reuse_checkpoint: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let path = cli.config.context("no config: pass --config PATH")?;
    let mut cfg = RunConfig::load(&path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(out) = cli.out {
        // relative to the working directory, not the config
        cfg.out_dir = Some(std::env::current_dir()?.join(out));
    }
    cfg.seed()?;
    match cli.command {
        Command::Extract => commands::cmd_extract(&cfg),
        Command::Synth => commands::cmd_synth(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Select { method, reuse_checkpoint } => commands::cmd_select(&cfg, method, reuse_checkpoint),
        Command::Evaluate => commands::cmd_evaluate(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Report { reuse_checkpoint } => commands::cmd_report(&cfg, reuse_checkpoint),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("METASEL_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = ExitKind::of(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(kind.code())
        }
    }
}
