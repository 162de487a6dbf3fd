//! Command-line surface for the farmhazard crates.
//!
//! Subcommands map one-to-one onto the library layers: `fit` and
//! `cross-validate` drive single-dataset estimation, `screen` the marginal
//! screener, `simulate` the replication harness, and `evaluate` the
//! C-index protocols. Every command writes its outputs plus a manifest
//! into the chosen directory; numeric CSV output uses full round-trip
//! float formatting so reruns can be compared byte for byte.

mod cmd_cv;
mod cmd_evaluate;
mod cmd_fit;
mod cmd_screen;
mod cmd_simulate;
mod common;
mod manifest;

use clap::{Args, Parser, Subcommand};

use common::{CliError, ExitCode};

#[derive(Parser)]
#[command(
    name = "farmhazard",
    version,
    about = "Factor-augmented regularized Cox regression",
    propagate_version = true
)]
struct Cli {
    /// Worker thread cap for parallel folds and replications; falls back
    /// to FARMHAZARD_THREADS, then to all cores. Does not change results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one penalized Cox procedure on a CSV dataset.
    Fit(cmd_fit::FitArgs),
    /// Rank covariates by factor-adjusted marginal association.
    Screen(cmd_screen::ScreenArgs),
    /// Cross-validate the penalty level and report the full curve.
    CrossValidate(cmd_cv::CvArgs),
    /// Run a replication experiment from a preset or a config file.
    Simulate(cmd_simulate::SimulateArgs),
    /// Score fitted coefficients, or run the repeated-split protocol.
    Evaluate(cmd_evaluate::EvaluateArgs),
}

/// Dataset schema flags shared by every command that reads a CSV.
#[derive(Args, Clone)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    csv: std::path::PathBuf,
    /// Name of the follow-up time column.
    #[arg(long, default_value = "time")]
    time: String,
    /// Name of the event indicator column (1 = event, 0 = censored).
    #[arg(long, default_value = "status")]
    status: String,
}

fn main() {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit::run(&args),
        Command::Screen(args) => cmd_screen::run(&args),
        Command::CrossValidate(args) => cmd_cv::run(&args),
        Command::Simulate(args) => cmd_simulate::run(&args),
        Command::Evaluate(args) => cmd_evaluate::run(&args),
    };
    match outcome {
        Ok(()) => {}
        Err(err) => {
            eprintln!("farmhazard: {err}");
            std::process::exit(err.exit_code() as i32);
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let requested = flag.or_else(|| {
        std::env::var("FARMHAZARD_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = requested {
        if n == 0 {
            eprintln!("farmhazard: ignoring a zero thread cap");
            return;
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            // The pool can only be installed once per process; a second
            // attempt is harmless but worth a note.
            eprintln!("farmhazard: thread pool already initialized ({err})");
        }
    }
}

// Exit-code contract lives next to main so the mapping is in one place.
const _: fn(&CliError) -> ExitCode = CliError::exit_code;
