use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod json;

/// Exit status 0: success. 2: ran, verdict negative. 1: error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Lib(#[from] pidgain::Error),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use pidgain::Error as E;
        match self {
            CliError::Lib(E::Region { .. } | E::CertificateInvalid { .. } | E::CertificateInapplicable(_) | E::NoCounterexampleClaimed) => {
                2
            }
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "pidgain", version, about = "PID gain regions, certificates, simulation and falsification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and report artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for parallel commands (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for sampled procedures; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sufficient and necessary region tests.
    Region {
        #[command(subcommand)]
        command: RegionCommand,
    },
    /// Build and check a Lyapunov certificate.
    Certify,
    /// Simulate one closed loop; writes trajectory.csv.
    Simulate,
    /// Simulate a gain grid over several plants; writes sweep.csv.
    Sweep,
    /// Worst-case counterexample for gains outside the necessary region.
    Falsify,
    /// Plant class membership.
    Class {
        #[command(subcommand)]
        command: ClassCommand,
    },
}

#[derive(Subcommand, Debug)]
enum RegionCommand {
    /// Verdicts and margins for one gain triple.
    Check,
    /// Two-dimensional slice; writes slice.csv.
    Slice,
}

#[derive(Subcommand, Debug)]
enum ClassCommand {
    /// Sample-scale membership report.
    Check,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let Some(path) = cli.common.config.clone() else {
        return Err(CliError::Usage("--config <path> is required".into()));
    };
    let c = &cli.common;
    match cli.command {
        Command::Region { command: RegionCommand::Check } => commands::region_check(&config::load(&path)?, c),
        Command::Region { command: RegionCommand::Slice } => commands::region_slice(&config::load(&path)?, c),
        Command::Certify => commands::certify(&config::load(&path)?, c),
        Command::Simulate => commands::simulate(&config::load(&path)?, c),
        Command::Sweep => commands::sweep(&config::load(&path)?, c),
        Command::Falsify => commands::falsify(&config::load(&path)?, c),
        Command::Class { command: ClassCommand::Check } => commands::class_check(&config::load(&path)?, c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("pidgain: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
