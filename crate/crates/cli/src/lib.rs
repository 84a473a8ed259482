//! Batch front end for degradation, restoration, training, evaluation and
//! convergence diagnostics.
//!
//! Exit codes: 0 success, 1 configuration or domain failure (including a
//! failed diagnostic), 2 malformed input data.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};

use crate::config::Loaded;
use crate::error::{CliError, Result};

/// Caps the worker count; 0 runs everything on the calling thread.
pub const THREADS_ENV: &str = "UNROLL_RESTORE_THREADS";

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Apply the configured operator and noise to every image in --input.
    Degrade(CommonArgs),
    /// Restore degraded images with the configured solver and denoiser.
    Restore(CommonArgs),
    /// Train the unrolled network on patches of the clean images in --input.
    Train(CommonArgs),
    /// Compare restored images (--input) against ground truth (--truth).
    Eval(CommonArgs),
    /// Check a solver trace CSV (--input) for the convergence conditions.
    Diagnose(CommonArgs),
}

#[derive(Clone, Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Ground-truth directory for reports.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    /// Reads the config (if any) and applies command-line overrides.
    pub fn load(&self, required: bool) -> Result<Loaded> {
        let mut loaded = match &self.config {
            Some(p) => Loaded::from_file(p)?,
            None if required => return Err(CliError::Config("--config is required".into())),
            None => Loaded::default(),
        };
        let io = &mut loaded.config.io;
        if let Some(p) = &self.input {
            io.input = Some(p.clone());
        }
        if let Some(p) = &self.output {
            io.output = Some(p.clone());
        }
        if let Some(p) = &self.truth {
            io.truth = Some(p.clone());
        }
        if let Some(s) = self.seed {
            loaded.config.seed = s;
        }
        Ok(loaded)
    }
}

/// Runs a command inside a worker pool sized by [`THREADS_ENV`] and returns
/// the process exit code.
pub fn run(cmd: &Command) -> Result<u8> {
    let pool = thread_pool()?;
    pool.install(|| match cmd {
        Command::Degrade(a) => commands::degrade(&a.load(true)?),
        Command::Restore(a) => commands::restore(&a.load(true)?),
        Command::Train(a) => commands::train(&a.load(true)?),
        Command::Eval(a) => commands::eval(&a.load(false)?),
        Command::Diagnose(a) => commands::diagnose(&a.load(false)?),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            CliError::Config(format!("{THREADS_ENV} must be an integer, got {v:?}"))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

/// Image files (PGM/PNG) in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let ext = Path::new(&name)
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "png")) && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// File name without its extension.
pub fn stem(name: &str) -> &str {
    Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name)
}
