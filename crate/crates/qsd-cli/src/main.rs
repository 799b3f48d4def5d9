use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsd_cli::config::{CliError, RunConfig};
use qsd_cli::runner;
use qsd_core::engine::ExecutionMode;

/// Particle approximation of quasi-stationary distributions, with spectral
/// and coupling cross-checks.
#[derive(Parser)]
#[command(name = "qsd", version)]
struct Cli {
    /// Compute particle proposals on all cores (results are identical to
    /// serial execution).
    #[arg(long, global = true)]
    parallel: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write empirical.csv, mass_loss.csv,
    /// summary.json (and comparison.json when configured).
    Run { config: PathBuf },
    /// Run every cell of the configured parameter sweep and write an
    /// index.csv alongside the per-run directories.
    Sweep { config: PathBuf },
    /// Solve the 1D eigenproblem for the configured model and write
    /// oracle.csv and oracle.json.
    Oracle { config: PathBuf },
    /// Check the reflected-process domination bound and write couple.json.
    #[command(name = "couple-check")]
    CoupleCheck { config: PathBuf },
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mode = if cli.parallel { ExecutionMode::Parallel } else { ExecutionMode::Serial };
    match &cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::from_path(config)?;
            let out = runner::execute_run(&cfg, mode)?;
            println!("lambda_hat = {}", out.result.lambda_hat);
            println!("jump_rate = {}", out.result.jump_rate);
            println!("mean_phi = {}", out.mean_phi);
            if let Some(cmp) = &out.comparison {
                println!("W1 to {} target = {}", cmp.target, cmp.w1);
            }
            println!("artifacts in {}", out.dir.display());
        }
        Command::Sweep { config } => {
            let cfg = RunConfig::from_path(config)?;
            let (index, cells) = runner::execute_sweep(&cfg, mode)?;
            for cell in &cells {
                match cell.lambda_hat {
                    Some(l) => println!(
                        "run_{:03}: value = {}, lambda_hat = {l}, mean_phi = {}",
                        cell.index,
                        cell.value,
                        cell.mean_phi.unwrap_or(f64::NAN)
                    ),
                    None => println!("run_{:03}: value = {}, {}", cell.index, cell.value, cell.status),
                }
            }
            println!("index at {}", index.display());
        }
        Command::Oracle { config } => {
            let cfg = RunConfig::from_path(config)?;
            let out = runner::execute_oracle(&cfg)?;
            println!("lambda = {}", out.lambda);
            println!("residual = {}", out.residual);
            println!("grid_n = {}", out.grid_n);
            println!("artifacts in {}", out.dir.display());
        }
        Command::CoupleCheck { config } => {
            let cfg = RunConfig::from_path(config)?;
            let (report, dir) = runner::execute_couple(&cfg, None)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            println!("artifacts in {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
