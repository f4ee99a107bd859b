//! Configuration-driven runner for spin-chain entropy simulations.

pub mod config;
pub mod error;
pub mod oracle;
pub mod plot;
pub mod runner;

pub use config::SimulationConfig;
pub use error::{CliError, Result};
pub use runner::{run, simulate, Manifest, RunOptions, RunOutput, Simulation};
