//! `cavimag` command-line front-end.

mod context;
mod estimate;
mod fit;
mod plan;
mod ringdown;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};


#[derive(Debug, Parser)]
#[command(name = "cavimag", version, about = "Magnon-photon hybrid simulation and fitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a transmission sweep or multimode eigenspectra.
    Simulate(simulate::SimulateArgs),
    /// Fit a single resonance or run the full coupled-mode analysis on a sweep.
    Fit(fit::FitArgs),
    /// Simulate a pulsed ring-down and fit its decay.
    Ringdown(ringdown::RingdownArgs),
    /// Closed-form estimates from device and measurement parameters.
    Estimate(estimate::EstimateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Ringdown(a) => ringdown::run(a),
        Command::Estimate(a) => estimate::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
