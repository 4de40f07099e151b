//! `lbm`: runs one experiment from a configuration file and writes CSV.
//!
//! Exit codes: 0 success, 2 configuration error, 3 instability, 4 constraint
//! violation, 1 anything else.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use lbm_core::{parse_config, run_command, Command, LbmError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    /// Derived parameters, predicted transport and constraint residuals.
    Constraints,
    /// Amplification-matrix eigenvalues along rays of wave vectors.
    ZeroPoint,
    /// Decay of a plane wave on a periodic grid.
    RelaxWave,
    /// Acoustic pulse inside a disc with an anti-bounce-back wall.
    Disc,
}

impl From<Experiment> for Command {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Constraints => Command::Constraints,
            Experiment::ZeroPoint => Command::ZeroPoint,
            Experiment::RelaxWave => Command::RelaxWave,
            Experiment::Disc => Command::Disc,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lbm", version, about = "Energy-conserving lattice Boltzmann experiments")]
struct Args {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Configuration file (`key = value` lines with `[section]` headers).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output CSV; standard output when absent. Disc snapshots go next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn run(args: &Args) -> Result<(), LbmError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| LbmError::Config(vec![lbm_core::ConfigError { line: 0, message: format!("{}: {e}", args.config.display()) }]))?;
    let cfg = parse_config(&text)?;
    let command = Command::from(args.experiment);
    match &args.out {
        Some(path) => {
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut w = BufWriter::new(fs::File::create(path)?);
            let r = run_command(command, &cfg, &mut w, dir);
            w.flush()?;
            r
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let r = run_command(command, &cfg, &mut w, Path::new("."));
            w.flush()?;
            r
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lbm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
