//! `qbeat`: prediction tables, simulation, correlation and beat analysis.

mod commands;
mod error;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "qbeat", version, about = "Conditional quantum-beat simulation and analysis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Defaults apply to every omitted key.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base seed for trajectories; overrides `run.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Histogram bin width: `1.64ns`, `16.4ns` or any `<number>[ns|ps]`; overrides `analysis.bin_ns`.
    #[arg(long, global = true, value_name = "WIDTH")]
    pub bin: Option<String>,
    /// Fit window `START,END` in μs; overrides `analysis.window_us`.
    #[arg(long, global = true, value_name = "START,END")]
    pub window: Option<String>,
    /// Drop start clicks without a gate copy; overrides `analysis.filter`.
    #[arg(long, global = true, value_enum)]
    pub filter: Option<Toggle>,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate light shifts, decoherence rate and protocol predictions.
    Predict,
    /// Deterministic g² curves and, with `run.n_traj > 0`, Monte-Carlo click streams.
    Simulate,
    /// Start–stop histograms of click-stream files.
    Correlate {
        /// Click streams (`.csv` or binary).
        #[arg(required = true, value_name = "STREAM")]
        streams: Vec<PathBuf>,
    },
    /// Match test curves against a reference and write fit reports.
    Analyze {
        /// Reference curve: histogram or g² CSV.
        #[arg(value_name = "REFERENCE")]
        reference: PathBuf,
        /// Curves to compare with the reference.
        #[arg(required = true, value_name = "TEST")]
        tests: Vec<PathBuf>,
    },
    /// Deterministic width sweep with phase and ln(scale) regressions.
    Sweep,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = commands::Context::new(&cli.global)?;
    match cli.command {
        Command::Predict => commands::predict(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Correlate { streams } => commands::correlate(&ctx, &streams),
        Command::Analyze { reference, tests } => commands::analyze(&ctx, &reference, &tests),
        Command::Sweep => commands::sweep(&ctx),
    }
}
