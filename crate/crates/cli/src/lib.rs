//! Experiment harness for `isa-core`: configuration, orchestration and
//! result files. The `isa` binary is a thin wrapper around [`run`].

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{report_compare, RunResult, Table};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::IncompatibleRuns(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::IncompatibleRuns(_) => "incompatible_runs",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<isa_core::DynamicsError> for CliError {
    fn from(e: isa_core::DynamicsError) -> Self {
        match e {
            isa_core::DynamicsError::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<isa_core::spectral::SpectralError> for CliError {
    fn from(e: isa_core::spectral::SpectralError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<isa_core::kramers::KramersError> for CliError {
    fn from(e: isa_core::kramers::KramersError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<isa_core::gibbs::GibbsError> for CliError {
    fn from(e: isa_core::gibbs::GibbsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "isa", version, about = "Infinite swapping, tempering and Langevin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eyring-Kramers bounds for the configured landscape and temperatures.
    Predict(RunArgs),
    /// Frozen-temperature sampling: trajectories, histogram, TV to the target.
    Sample(RunArgs),
    /// Simulated annealing success rates over seeds.
    Anneal(RunArgs),
    /// Spectral gap of the discretized generator.
    Spectrum(RunArgs),
    /// Side-by-side table of isa, Langevin and tempering.
    Compare(RunArgs),
    /// Tail estimates of ergodic averages against the deviation bound.
    Deviation(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set sde.dt=0.002`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; overrides `experiment.output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ISA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("ISA_THREADS = `{v}` is not a positive integer")))?;
    // The global pool can only be set once per process; later calls keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse `argv` (program name first), run the command and return the exit code.
/// Errors go to stderr as `error[<category>]: <message>`.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = match cli.command {
        Command::Predict(a) => (ExperimentKind::Predict, a),
        Command::Sample(a) => (ExperimentKind::Sample, a),
        Command::Anneal(a) => (ExperimentKind::Anneal, a),
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Compare(a) => (ExperimentKind::Compare, a),
        Command::Deviation(a) => (ExperimentKind::Deviation, a),
    };
    let result = configure_threads()
        .and_then(|_| ExperimentConfig::load(&args.config, &args.set))
        .and_then(|mut cfg| {
            if let Some(out) = args.out {
                cfg.experiment.output = Some(out);
            }
            commands::execute(kind, cfg)
        });
    match result {
        Ok(dir) => {
            log::info!("results in {}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
