//! Subcommand implementations. Each returns the run summary; the caller
//! writes it and turns failed checks into exit code 1.

pub mod are_solve;
pub mod compare;
pub mod contraction;
pub mod simulate;

use std::path::Path;

use riccati_geo::random::{self, SeededRng};

use crate::config::ScenarioConfig;
use crate::error::CliResult;
use crate::output::{ensure_dir, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    AreSolve,
    SimulateFull,
    SimulateLowrank,
    Contraction,
    Compare,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::AreSolve => "are-solve",
            Subcommand::SimulateFull => "simulate-full",
            Subcommand::SimulateLowrank => "simulate-lowrank",
            Subcommand::Contraction => "contraction",
            Subcommand::Compare => "compare",
        }
    }
}

/// Runs `command` and writes `summary.txt` into `out_dir`.
pub fn run(command: Subcommand, config: &ScenarioConfig, out_dir: &Path) -> CliResult<Summary> {
    ensure_dir(out_dir)?;
    log::info!("{} with seed {} into {}", command.name(), config.seed, out_dir.display());
    let summary = match command {
        Subcommand::AreSolve => are_solve::run(config, out_dir)?,
        Subcommand::SimulateFull => simulate::run_full(config, out_dir)?,
        Subcommand::SimulateLowrank => simulate::run_lowrank(config, out_dir)?,
        Subcommand::Contraction => contraction::run(config, out_dir)?,
        Subcommand::Compare => compare::run(config, out_dir)?,
    };
    summary.write(&out_dir.join("summary.txt"))?;
    Ok(summary)
}

/// Random stream for initial conditions, independent of the truth noise.
pub(crate) fn init_rng(seed: u64) -> SeededRng {
    random::rng(seed ^ 0x9e37_79b9_7f4a_7c15)
}
