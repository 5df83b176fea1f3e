use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drivetrain_mfc::commands::{self, RunOptions};
use drivetrain_mfc::scenario::{defaults_document, key_reference};
use drivetrain_mfc::Failure;

#[derive(Parser)]
#[command(name = "drivetrain-mfc", version, about = "P-PI vs model-free iP-iP control of a two-mass drive-train")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation (series.csv, metrics.json, tracking_error.svg)
    #[command(after_help = key_reference(&["plant", "controller", "trajectory", "sim"]))]
    Simulate(RunArgs),
    /// Run the five-configuration comparison (comparison.csv)
    #[command(after_help = key_reference(&["plant", "controller", "trajectory", "sim", "tuning"]))]
    Compare(RunArgs),
    /// Optimize the controller gains (tuned_gains.json, tuning_log.csv)
    #[command(after_help = key_reference(&["plant", "controller", "trajectory", "sim", "tuning"]))]
    Tune(RunArgs),
    /// Monte Carlo sweep over the wear parameters (montecarlo.csv, stem.svg, histograms.svg)
    #[command(after_help = key_reference(&["plant", "trajectory", "sim", "montecarlo"]))]
    Montecarlo(RunArgs),
    /// Export the resolved reference trajectory (trajectory.csv)
    #[command(after_help = key_reference(&["trajectory", "sim"]))]
    Trajectory(RunArgs),
    /// Print a scenario file with every section at its default values
    Defaults,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON)
    scenario: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides every seed in the scenario
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo draws (1 = serial)
    #[arg(long, env = "DRIVETRAIN_MFC_THREADS")]
    threads: Option<usize>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions { out: self.out.clone(), seed: self.seed, threads: self.threads }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: Result<String, Failure> = match &cli.command {
        Command::Simulate(a) => commands::simulate(&a.scenario, &a.options()),
        Command::Compare(a) => commands::compare(&a.scenario, &a.options()),
        Command::Tune(a) => commands::tune_cmd(&a.scenario, &a.options()),
        Command::Montecarlo(a) => commands::montecarlo_cmd(&a.scenario, &a.options()),
        Command::Trajectory(a) => commands::trajectory_cmd(&a.scenario, &a.options()),
        Command::Defaults => serde_json::to_string_pretty(&defaults_document())
            .map(|s| s + "\n")
            .map_err(|e| Failure::Io(e.into())),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
