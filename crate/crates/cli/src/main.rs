//! `vspectra`: reduce singular expressions, compute spectra, transform
//! quasi-derivative frames and run verification suites from a JSON config.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Options;
use crate::config::ProblemConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vspectra", version, about = "Spectra of singular differential operators via Volterra reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Problem description (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for the emitted artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Overrides `grid.points` from the config.
    #[arg(long, global = true)]
    grid_points: Option<usize>,

    /// Also write SVG plots.
    #[arg(long, global = true)]
    plot: bool,

    /// Seed for the random test expressions of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the operator form: kernel.csv, u.csv, form.json.
    Reduce,
    /// Eigenvalues, root functions, completeness diagnostics and the hypothesis report.
    Spectrum,
    /// Frames of two regularizations and their difference: frames.csv.
    TransformQd,
    /// Pass/fail table of the built-in checks: verify.csv.
    Verify,
}

fn configure_threads() {
    let Ok(value) = std::env::var("VSPECTRA_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: VSPECTRA_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: VSPECTRA_THREADS={value} is not a positive integer; ignored"),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = ProblemConfig::load(&path)?;
    if let Some(points) = cli.grid_points {
        cfg.grid.points = points;
    }
    let opts = Options {
        out_dir: cli.out_dir,
        plot: cli.plot,
        seed: cli.seed,
    };
    match cli.command {
        Command::Reduce => commands::reduce(&cfg, &opts),
        Command::Spectrum => commands::spectrum(&cfg, &opts),
        Command::TransformQd => commands::transform_qd(&cfg, &opts),
        Command::Verify => commands::verify(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(vspectra::Error::ZeroInSpectrum { suggested_shift, .. }) = &e {
                eprintln!("hint: add \"shift\": \"{suggested_shift}\" to the config to compute the spectrum of L + aI");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
