//! `edpls`: simulate data, fit and apply (private) PLS1 models, run the
//! weight-projection attack, sweep privacy budgets and preprocess spectra.

mod commands;
mod config;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edpls::{Error, ErrorClass};

use settings::{AttackFlags, FitFlags, PredictFlags, PreprocessFlags, SimulateFlags, SweepFlags};

#[derive(Parser)]
#[command(name = "edpls", version, about = "Differentially private PLS1 regression")]
struct Cli {
    /// Flat `key = value` TOML file; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-holder simulated spectra.
    Simulate(SimulateFlags),
    /// Fit a baseline or differentially private PLS1 model.
    Fit(FitFlags),
    /// Apply a fitted model to new spectra.
    Predict(PredictFlags),
    /// Project a global model off a locally fitted one.
    Attack(AttackFlags),
    /// Cross-validation and privacy-utility sweeps.
    Sweep(SweepFlags),
    /// Fit a preprocessing pipeline and transform spectra.
    Preprocess(PreprocessFlags),
}

/// Exit status per error class.
fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Argument => 2,
        ErrorClass::Io => 3,
        ErrorClass::Shape => 4,
        ErrorClass::Numerical => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = cli.config.as_deref();
    let result = match &cli.command {
        Command::Simulate(f) => commands::simulate(cfg, f),
        Command::Fit(f) => commands::fit(cfg, f),
        Command::Predict(f) => commands::predict(cfg, f),
        Command::Attack(f) => commands::attack(cfg, f),
        Command::Sweep(f) => commands::sweep(cfg, f),
        Command::Preprocess(f) => commands::preprocess(cfg, f),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
