//! `sumcal`: batch front end for calibrating models against reported
//! summary statistics.

mod commands;
mod error;
mod setup;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sumcal", version, about = "Calibrate model parameters against reported summary statistics")]
struct Cli {
    /// Worker threads for parallel fits and beta candidates.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit per-station polynomial chaos surrogates from training samples.
    FitSurrogate(FitArgs),
    /// Total-effect Sobol indices, ranking and truncation.
    Sensitivity(SensitivityArgs),
    /// Write the bounds of the retained parameters.
    Reduce(ReduceArgs),
    /// Tune the synthetic-data variance scale per experiment.
    ConsistentData(ConsistentArgs),
    /// Full pipeline: consistent data, joint posterior, pushforward.
    Calibrate(CalibrateArgs),
    /// Pushforward summaries from a stored chain.
    Pushforward(PushforwardArgs),
    /// Summarise a finished run.
    Report(ReportArgs),
    /// Run the bundled Arrhenius ground-truth problem end to end.
    Demo(DemoArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?;
    }
    match cli.command {
        Command::FitSurrogate(a) => {
            let out = fit_surrogate(&a)?;
            match out.worst_test_error {
                Some(e) => println!("wrote {} (worst station test error {e:.3e})", out.archive.display()),
                None => println!("wrote {}", out.archive.display()),
            }
        }
        Command::Sensitivity(a) => {
            let t = sensitivity(&a)?;
            println!("retained: {}", t.retained_names().join(", "));
        }
        Command::Reduce(a) => {
            let r = reduce(&a)?;
            println!("wrote {} ({} parameters)", a.out.display(), r.len());
        }
        Command::ConsistentData(a) => consistent_data(&a)?,
        Command::Calibrate(a) => {
            calibrate(&a, sumcal::CalibrationConfig::default())?;
        }
        Command::Pushforward(a) => {
            let s = pushforward_cmd(&a)?;
            println!("wrote {} pushforward summaries", s.len());
        }
        Command::Report(a) => print!("{}", report(&a)?),
        Command::Demo(a) => {
            demo(&a)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
