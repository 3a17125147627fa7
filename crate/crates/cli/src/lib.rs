//! Command-line front end: config loading, commands and exit codes.

pub mod config;
mod commands;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_bench, cmd_calibrate, cmd_detect, cmd_lfd, cmd_sample, parse_stream_line, Context};
pub use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration. Exit code 2.
    Input(String),
    /// A modelling assumption fails on the data. Exit code 3.
    Assumption(String),
    /// Anything else, such as I/O failures or diverged training. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Assumption(m) => write!(f, "assumption violated: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rscusum::Error> for CliError {
    fn from(e: rscusum::Error) -> Self {
        use rscusum::Error as E;
        match e {
            E::PositiveDrift { .. } => CliError::Assumption(e.to_string()),
            E::LangevinDiverged(_) | E::TrainingDiverged(_) => CliError::Runtime(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "rscusum", version, about = "Robust score-based CUSUM change detection")]
pub struct Cli {
    /// Experiment config (JSON with a version field).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for Monte Carlo work.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the least favorable pair for the configured families.
    Lfd,
    /// Solve for the multiplier and print thresholds for the ARL targets.
    Calibrate,
    /// Drift table and ARL/EDD sweep for every configured trial.
    Bench,
    /// Run the configured detector over a stream of vectors.
    Detect {
        /// Stream file; standard input when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Draw samples from a configured model.
    Sample,
}

/// Runs one parsed invocation. `stdin` feeds `detect` when no input file is given.
pub fn run(cli: &Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Input("--config is required".into()))?;
    let cfg = ExperimentConfig::load(path)?;
    let ctx = Context { seed: cli.seed.or(cfg.seed), out: cli.out.clone() };
    if cli.workers == Some(0) {
        return Err(CliError::Input("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let parallel = |cmd: fn(&ExperimentConfig, &Context, &mut dyn Write) -> Result<(), CliError>,
                    stdout: &mut dyn Write| {
        let mut buf = Vec::new();
        let result = pool.install(|| cmd(&cfg, &ctx, &mut buf));
        stdout.write_all(&buf)?;
        result
    };
    match &cli.command {
        Command::Lfd => parallel(cmd_lfd, stdout),
        Command::Calibrate => parallel(cmd_calibrate, stdout),
        Command::Bench => parallel(cmd_bench, stdout),
        Command::Sample => parallel(cmd_sample, stdout),
        Command::Detect { input } => match input {
            Some(p) => {
                let f = std::fs::File::open(p)
                    .map_err(|e| CliError::Input(format!("cannot open {}: {e}", p.display())))?;
                cmd_detect(&cfg, &ctx, &mut std::io::BufReader::new(f), stdout)
            }
            None => cmd_detect(&cfg, &ctx, stdin, stdout),
        },
    }
}
