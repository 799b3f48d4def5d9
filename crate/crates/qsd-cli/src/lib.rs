//! Configuration handling and experiment orchestration for the particle
//! simulation toolkit: single runs, parameter sweeps, the spectral
//! reference solver, and the coupling check, all driven by one TOML file.

pub mod config;
pub mod runner;

pub use config::{CliError, RunConfig};
pub use runner::{execute_couple, execute_oracle, execute_run, execute_sweep, RunOutcome};
