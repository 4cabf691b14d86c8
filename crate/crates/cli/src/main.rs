//! Command-line front end: raw antithetic sampling, statistical
//! diagnostics, estimator variance benchmarks, and VI training, all
//! emitting CSV/JSON for external tooling.

mod commands;
mod config;

use clap::{Parser, Subcommand};

/// Exit codes shared by all subcommands.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const DIVERGED: i32 = 4;
}

#[derive(Parser)]
#[command(name = "antikit", about = "Antithetic sampling experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one batch (with optional antithetic half) as CSV.
    Sample(commands::sample::SampleArgs),
    /// Run the statistical check suite and emit a JSON report.
    Diagnose(commands::diagnose::DiagnoseArgs),
    /// Estimator variance across k/d/mode as CSV.
    VarianceBench(commands::bench::BenchArgs),
    /// Train a toy VI model; writes a trace CSV and a model JSON.
    Train(commands::train::TrainArgs),
}

fn classify(err: &antikit::Error) -> i32 {
    match err {
        antikit::Error::Config(_) | antikit::Error::Shape(_) => exit::CONFIG,
        antikit::Error::Diverged { .. } => exit::DIVERGED,
        antikit::Error::Domain(_)
        | antikit::Error::Degenerate(_)
        | antikit::Error::NonFinite { .. } => exit::DEGENERATE,
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sample(args) => commands::sample::run(args),
        Command::Diagnose(args) => commands::diagnose::run(args),
        Command::VarianceBench(args) => commands::bench::run(args),
        Command::Train(args) => commands::train::run(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(classify(&e));
        }
    }
}
