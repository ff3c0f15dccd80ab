//! Command-line driver for the lazylab experiments.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies
//! `--set key=value` overrides and `--seed`, echoes the resolved config to
//! `<out>/config.toml`, and writes its results as CSV next to it.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<lazylab::Error> for CliError {
    fn from(e: lazylab::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lazylab", version, about = "Lazy vs feature-learning training experiments")]
pub struct Cli {
    /// TOML config file; every key has a default.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "LAZYLAB_OUT", default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    /// Base seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Parallel training jobs (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Config override, e.g. `--set train.steps=200`. Repeatable; applied in order.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Paired α runs on yin-yang and Δloss maps at matched training loss.
    Toy2d,
    /// Label-noise protocol: clean vs noisy groups at matched clean loss.
    Noisy,
    /// Quadratic-model trajectories, oracle residuals and convergence tables.
    Quadratic {
        /// Only run the oracle comparison; fail if any residual reaches the tolerance.
        #[arg(long)]
        check_oracles: bool,
    },
    /// Per-example and per-group curves for the three worked examples, plus MLP counterparts.
    Examples {
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
    },
    /// Consistency-score estimates and quantile groups on yin-yang.
    Cscore,
    /// Linearity probes along runs at several α.
    Probe,
    /// Aligns two saved traces by mean training loss.
    Compare {
        /// First trace CSV.
        a: PathBuf,
        /// Second trace CSV.
        b: PathBuf,
    },
}

/// Resolved global options handed to each subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Context {
    /// Loads the subcommand's config, with `--seed` applied last.
    pub fn load<T: serde::de::DeserializeOwned + Serialize + Default>(&self) -> Result<T, CliError> {
        config::load(self.config.as_deref(), &self.overrides)
    }

    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.out.join(name)
    }

    /// Writes the resolved config as `config.toml`.
    pub fn echo<T: Serialize>(&self, cfg: &T) -> Result<(), CliError> {
        let text = toml::to_string(cfg).map_err(|e| CliError::Config(format!("cannot echo config: {e}")))?;
        write_file(&self.path("config.toml"), text.as_bytes())
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Renders rows with the `csv` crate and writes them to `path`.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    write_file(path, &bytes)
}

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides.clone();
    let ignores_seed = matches!(cli.command, Command::Compare { .. });
    if let Some(seed) = cli.seed {
        if ignores_seed {
            log::warn!("--seed has no effect on compare");
        } else {
            overrides.push(format!("seed={seed}"));
        }
    }
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be >= 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let ctx = Context {
        config: cli.config,
        overrides,
        out: cli.out,
        jobs,
    };
    create_dir(&ctx.out)?;
    match cli.command {
        Command::Toy2d => commands::toy2d::run(&ctx),
        Command::Noisy => commands::noisy::run(&ctx),
        Command::Quadratic { check_oracles } => commands::quadratic::run(&ctx, check_oracles),
        Command::Examples { which } => commands::examples::run(&ctx, which),
        Command::Cscore => commands::cscore::run(&ctx),
        Command::Probe => commands::probe::run(&ctx),
        Command::Compare { a, b } => commands::compare::run(&ctx, &a, &b),
    }
}
