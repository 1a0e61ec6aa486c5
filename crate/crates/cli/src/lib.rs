//! Command-line front end for the `seqlink` phase-linking toolkit.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! validation errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod manifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<seqlink_core::Error> for CliError {
    fn from(e: seqlink_core::Error) -> Self {
        use seqlink_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::DimensionMismatch(_) | E::OutOfRange(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "seqlink", version, about = "Sequential covariance-fitting phase linking for SAR image stacks")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SEQLINK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate an image stack and its true phases from a config file.
    Simulate(SimulateArgs),
    /// Estimate per-pixel phases of an image stack.
    Solve(SolveArgs),
    /// Run Monte Carlo MSE experiments described by a config file.
    Bench(BenchArgs),
    /// Time one sequential solve against one offline solve.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Config file with keys l, p, k, rho, nu, distribution, height, width, seed.
    pub config: PathBuf,
    /// Output prefix; writes PREFIX.stack, PREFIX.past.stack, PREFIX.new.stack,
    /// PREFIX.truth.csv and PREFIX.stack.manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMode {
    Offline,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Input stack (the new images in sequential mode).
    pub stack: PathBuf,
    #[arg(long, value_enum, default_value = "offline")]
    pub mode: SolveMode,
    /// kl or frob.
    #[arg(long, default_value = "kl")]
    pub distance: String,
    /// scm or po.
    #[arg(long, default_value = "scm")]
    pub estimator: String,
    /// none, shrink:BETA or taper:B.
    #[arg(long, default_value = "none")]
    pub regularizer: String,
    /// Sliding window side length in pixels.
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Past phase raster (sequential mode).
    #[arg(long)]
    pub past_phases: Option<PathBuf>,
    /// Past image stack (sequential mode). Defaults to the input stack
    /// recorded in the manifest of the past phase raster.
    #[arg(long)]
    pub past_stack: Option<PathBuf>,
    /// Output phase raster path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
    /// Truth CSV; the maximum angle error is recorded in the manifest.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config file; each `[section]` is one experiment.
    pub config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-trial CSV with the raw squared errors.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub k: usize,
    /// kl or frob.
    #[arg(long, default_value = "kl")]
    pub distance: String,
    /// Repetitions; the median is reported.
    #[arg(long, default_value_t = 7)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Timing(a) => commands::timing(&a),
    })
}
