//! `supwatt`: simulate appliance traces, detect activations, classify their
//! operation modes, score the pipeline and advise on load shifting.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

/// Environment variable capping worker threads; 0 means one per core.
const THREADS_VAR: &str = "SUPWATT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "supwatt", version, about)]
struct Cli {
    /// JSON file of default flag values; flags on the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate day traces with ground-truth labels
    Simulate(commands::SimulateArgs),
    /// Find activation turn-on times with a reference pattern
    Detect(commands::DetectArgs),
    /// Assign an operation mode to each turn-on time
    Classify(commands::ClassifyArgs),
    /// Per-mode precision, recall and F1 over simulated households
    Evaluate(commands::EvaluateArgs),
    /// Mean detection count against reference-pattern size
    Sweep(commands::SweepArgs),
    /// Load-shifting and lighter-mode advice for classified events
    Recommend(commands::RecommendArgs),
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        CliError::Validation(format!("{THREADS_VAR}={raw:?} is not a thread count"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_VAR}: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = cli.config.as_deref().map(config::load).transpose()?;
    let cfg = cfg.as_ref();
    match &cli.command {
        Command::Simulate(args) => commands::simulate(args, cfg),
        Command::Detect(args) => commands::detect(args, cfg),
        Command::Classify(args) => commands::classify(args, cfg),
        Command::Evaluate(args) => commands::evaluate(args, cfg),
        Command::Sweep(args) => commands::sweep(args, cfg),
        Command::Recommend(args) => commands::recommend_cmd(args, cfg),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and 0 for --help/--version
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("supwatt: {err}");
            err.exit_code()
        }
    }
}
