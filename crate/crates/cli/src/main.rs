//! `latent-adjust`: analyze a data set, run simulation sweeps, and compute
//! resemblance curves across several gene lists.

mod analyze;
mod error;
mod io;
mod resemblance;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "latent-adjust", version, about = "Rank genes by association with a primary variable under latent confounding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test every gene of one data set.
    Analyze(analyze::AnalyzeArgs),
    /// Monte Carlo comparison of the methods over a grid of scenarios.
    Simulate(simulate::SimulateArgs),
    /// Pooled overlap and union counts of several p-value lists.
    Resemblance(resemblance::ResemblanceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Resemblance(args) => resemblance::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
