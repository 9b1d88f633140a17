//! `mqssd`: benchmark, calibrate and apply multi-queue SSD cost models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 I/O
//! failure.

mod args;
mod bench;
mod calibrate;
mod compare;
mod config;
mod lsm;
mod output;
mod predict;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Storage cost modeling for multi-queue SSDs.
#[derive(Debug, Parser)]
#[command(name = "mqssd", version, args_override_self = true)]
struct Cli {
    /// JSON file whose keys mirror the long flags; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the concurrency × randomness benchmark grid (or synthesize it).
    Bench(bench::BenchArgs),
    /// Fit all four models to a trial CSV or to tabulated per-k costs.
    Calibrate(calibrate::CalibrateArgs),
    /// Predict throughput of every model over a grid.
    Predict(predict::PredictArgs),
    /// Score predictions against measured trials.
    Compare(compare::CompareArgs),
    /// LSM-tree cost grids and the compaction data-movement simulator.
    #[command(subcommand)]
    Lsm(lsm::LsmCommand),
}

/// A request that is well-formed for the parser but makes no sense.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use mqssd_core::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_) | E::GridAborted { .. } => 3,
                E::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 3,
                _ => 2,
            };
        }
        if let Some(c) = cause.downcast_ref::<csv::Error>() {
            return if matches!(c.kind(), csv::ErrorKind::Io(_)) { 3 } else { 2 };
        }
        if cause.is::<std::io::Error>() {
            return 3;
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bench(a) => bench::run(a),
        Command::Calibrate(a) => calibrate::run(a),
        Command::Predict(a) => predict::run(a),
        Command::Compare(a) => compare::run(a),
        Command::Lsm(c) => lsm::run(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let argv = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(if e.chain().any(|c| c.is::<std::io::Error>()) { 3 } else { 1 });
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
