use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use riccati_geo_cli::commands::{self, Subcommand};
use riccati_geo_cli::config::ScenarioConfig;
use riccati_geo_cli::error::CliResult;

/// Riccati flow experiments on SPD and fixed-rank geometries.
#[derive(Parser)]
#[command(name = "riccati-geo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Solve the algebraic Riccati equation by following the flow.
    AreSolve(RunArgs),
    /// Run the full Kalman-Bucy filter on a simulated trace.
    SimulateFull(RunArgs),
    /// Run the discrete low-rank filter on a simulated trace.
    SimulateLowrank(RunArgs),
    /// Run the configured contraction checks.
    Contraction(RunArgs),
    /// Time the full and low-rank filters on heat1d at several sizes.
    Compare(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Subcommand, args: &RunArgs) -> CliResult<bool> {
    let mut config = ScenarioConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = config.output_dir(args.out.as_deref());
    Ok(commands::run(command, &config, &out)?.all_passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    riccati_geo_cli::configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = match &cli.command {
        Command::AreSolve(a) => (Subcommand::AreSolve, a),
        Command::SimulateFull(a) => (Subcommand::SimulateFull, a),
        Command::SimulateLowrank(a) => (Subcommand::SimulateLowrank, a),
        Command::Contraction(a) => (Subcommand::Contraction, a),
        Command::Compare(a) => (Subcommand::Compare, a),
    };
    match execute(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("riccati-geo {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
