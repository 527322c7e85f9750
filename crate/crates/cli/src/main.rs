//! `nvsim`: run, sweep and plot the neurovascular and neuroglial models.

mod error;
mod output;
mod plot;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvsim::Model;

#[derive(Debug, Parser)]
#[command(
    name = "nvsim",
    version,
    about = "Coupled neuron/capillary and neuron/astrocyte network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its trace, summary and manifest.
    Run(run::RunArgs),
    /// Run a Cartesian parameter grid over several seeds.
    Sweep(sweep::SweepArgs),
    /// Render a figure from trace files.
    Plot(plot::PlotArgs),
}

/// Options shared by `run` and `sweep`.
#[derive(Debug, clap::Args)]
struct ModelArgs {
    /// a, b-coupled or b-pure.
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    /// TOML config file with flat or sectioned keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    t_max: Option<u64>,
    /// Worker threads per run (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::cmd_run(args),
        Command::Sweep(args) => sweep::cmd_sweep(args),
        Command::Plot(args) => plot::cmd_plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
