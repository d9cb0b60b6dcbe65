//! Command-line driver: configuration, the five subcommands and report export.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::Layers;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RESIDUAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("identity check failed: {0}")]
    Residual(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Residual(_) => EXIT_RESIDUAL,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<zcl_core::Error> for CliError {
    fn from(e: zcl_core::Error) -> Self {
        use zcl_core::Error as E;
        match e {
            E::Io(_) => CliError::Io(e.to_string()),
            E::Csv(ref c) if c.is_io_error() => CliError::Io(e.to_string()),
            E::GapMismatch { .. } => CliError::Residual(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "zcl", version, about = "Misiołek curvature on spheroids and its Coriolis extension")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config file (key = value lines)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Grid resolution as RxT, e.g. 129x128
    #[arg(long, global = true, value_name = "RxT")]
    pub resolution: Option<String>,
    /// Override any config key
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Export the surface profile as CSV
    Surface,
    /// Evaluate every identity residual; exit 2 if any exceeds its tolerance
    Verify,
    /// Extended curvature report as JSON
    Mc,
    /// Search for a perturbation with positive extended curvature
    Search,
    /// Curvature table over the scan.* parameter grid as CSV
    Scan,
}

fn resolution(text: &str) -> Result<(String, String), CliError> {
    let (r, t) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Config(format!("--resolution {text:?}: expected RxT")))?;
    Ok((r.trim().to_string(), t.trim().to_string()))
}

/// Layers defaults, file, environment and flags into a validated config.
pub fn load_config(cli: &Cli, env: impl IntoIterator<Item = (String, String)>) -> Result<config::RunConfig, CliError> {
    let mut layers = Layers::defaults();
    if let Some(path) = &cli.config {
        layers.apply_file(path)?;
    }
    layers.apply_env(env);
    for entry in &cli.set {
        let (k, v) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {entry:?}: expected KEY=VALUE")))?;
        layers.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        layers.set("seed", &seed.to_string())?;
    }
    if let Some(res) = &cli.resolution {
        let (r, t) = resolution(res)?;
        layers.set("grid.n_r", &r)?;
        layers.set("grid.n_theta", &t)?;
    }
    if let Some(out) = &cli.out {
        layers.set("output.path", &out.to_string_lossy())?;
    }
    layers.resolve()
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, env: impl IntoIterator<Item = (String, String)>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = load_config(&cli, env).and_then(|config| {
        let outcome = commands::execute(cli.command, &config)?;
        emit(&config.output, &outcome.text)?;
        Ok(outcome.code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("zcl: {e}");
            e.exit_code()
        }
    }
}
