//! `oscillate`: reproducible runs of cell problems, effective operators,
//! homogenization sweeps and regularity diagnostics.
//!
//! Exit status: 0 when every requested check passes, 1 on numerical failure
//! or a failed check, 2 on invalid configuration.

mod artifacts;
mod commands;
mod config;
mod lemmas;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use artifacts::Artifacts;
use config::{CommandKind, RunConfig, Settings};

pub const CACHE_ENV: &str = "OSCILLATE_CACHE_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{module} failed: {message}")]
    Numerical { module: &'static str, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscillate", version, about = "Periodic homogenization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    force: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one cell problem and print the effective value.
    Cell(RunArgs),
    /// Tabulate the effective operator on a matrix lattice.
    Effective(RunArgs),
    /// Run property checks on effective operators.
    Check(RunArgs),
    /// One Dirichlet solve of the oscillating equation.
    Solve(RunArgs),
    /// Boundary-layer correctors and their decay profiles.
    Blayer(RunArgs),
    /// Convergence sweep over epsilon.
    Sweep(RunArgs),
    /// Campanato-type cascade of two-scale fits.
    Campanato(RunArgs),
    /// Regularity certificates across an epsilon sweep.
    Certify(RunArgs),
}

impl Command {
    fn split(self) -> (CommandKind, RunArgs) {
        match self {
            Command::Cell(a) => (CommandKind::Cell, a),
            Command::Effective(a) => (CommandKind::Effective, a),
            Command::Check(a) => (CommandKind::Check, a),
            Command::Solve(a) => (CommandKind::Solve, a),
            Command::Blayer(a) => (CommandKind::Blayer, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Campanato(a) => (CommandKind::Campanato, a),
            Command::Certify(a) => (CommandKind::Certify, a),
        }
    }
}

fn run(kind: CommandKind, args: RunArgs) -> Result<bool, CliError> {
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let cache_dir = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let cfg = RunConfig::load(kind, args.settings, args.config.as_deref(), args.force, cache_dir)?;
    let mut art = Artifacts::default();
    let passed = match kind {
        CommandKind::Cell => commands::cell(&cfg, &mut art),
        CommandKind::Effective => commands::effective(&cfg, &mut art),
        CommandKind::Check => commands::check(&cfg, &mut art),
        CommandKind::Solve => commands::solve(&cfg, &mut art),
        CommandKind::Blayer => commands::blayer(&cfg, &mut art),
        CommandKind::Sweep => commands::sweep(&cfg, &mut art),
        CommandKind::Campanato => commands::campanato(&cfg, &mut art),
        CommandKind::Certify => commands::certify(&cfg, &mut art),
    }?;
    art.write(&cfg, passed)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("oscillate {kind}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
