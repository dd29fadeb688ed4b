//! `anyonrng`: simulate, bound, certify and extract.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyonrng_core::Error as CoreError;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Io { .. } => 2,
            Self::Core(e) => match e {
                CoreError::InvalidArgument(_) | CoreError::MissingMoment(_) => 2,
                CoreError::DataIntegrity(_) => 4,
                CoreError::Solver(_) | CoreError::Protocol(_) | CoreError::Internal(_) => 3,
            },
            Self::Validation(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "anyonrng", version, about = "Device-independent randomness from braided Majorana qubits")]
struct Cli {
    /// JSON run configuration; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run k protocol rounds and estimate the MABK value.
    Simulate(RunConfig),
    /// Tabulate f(L) = -log2 P*(L) on a grid.
    Fcurve(RunConfig),
    /// Certify min-entropy for recorded trials.
    Certify(RunConfig),
    /// Net randomness against k for a settings family.
    Expand(RunConfig),
    /// Certify, then hash the raw outcomes with a Toeplitz extractor.
    Extract(RunConfig),
    /// Check braid matrices, CNOT branches and GHZ correlators.
    Validate(RunConfig),
}

fn init_threads(cfg: &RunConfig) -> Result<(), CliError> {
    let threads = match cfg.threads {
        Some(t) => Some(t),
        None => match std::env::var("ANYONRNG_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("ANYONRNG_THREADS='{v}' is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

impl Command {
    fn flags(&self) -> &RunConfig {
        match self {
            Self::Simulate(c) | Self::Fcurve(c) | Self::Certify(c) | Self::Expand(c) | Self::Extract(c) | Self::Validate(c) => c,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref(), cli.command.flags())?;
    init_threads(&cfg)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(cfg),
        Command::Fcurve(_) => commands::fcurve(cfg),
        Command::Certify(_) => commands::certify(cfg),
        Command::Expand(_) => commands::expand(cfg),
        Command::Extract(_) => commands::extract(cfg),
        Command::Validate(_) => commands::validate(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
