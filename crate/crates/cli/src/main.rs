use clap::{Parser, Subcommand};
use moment_mrf_cli::{run, CliError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "moment-mrf", version, about = "Continuous-label MRF inference with piecewise-polynomial duals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve each (pieces, degree) entry on seeded random unaries.
    Hierarchy { config: PathBuf },
    /// Fit and solve a cost volume, writing a disparity map.
    Stereo { config: PathBuf },
    /// Compare dual energies on a chain with the grid dynamic program.
    OracleCompare { config: PathBuf },
    /// Write a synthetic cost volume with a planar ground truth.
    MakeSynth { config: PathBuf },
}

fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Hierarchy { config } => {
            let cfg = RunConfig::load(&config)?;
            Ok(run::csv(&run::run_hierarchy(&cfg)?, cfg.deterministic))
        }
        Command::Stereo { config } => {
            let cfg = RunConfig::load(&config)?;
            Ok(run::csv(&run::run_stereo(&cfg)?, cfg.deterministic))
        }
        Command::OracleCompare { config } => run::oracle_compare(&RunConfig::load(&config)?),
        Command::MakeSynth { config } => {
            let cfg = RunConfig::load(&config)?;
            let v = run::make_synth(&cfg)?;
            Ok(format!("wrote {} ({}x{}x{})\n", cfg.output.join("synth.mcv").display(), v.width, v.height, v.labels))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
