//! Config-driven front end for the `mcmlab` library.

pub mod commands;
pub mod config;
pub mod output;

use clap::Parser;
use std::path::PathBuf;

pub use config::{Command, RunConfig};

/// Environment variable overriding the output directory of the config.
pub const OUT_DIR_ENV: &str = "MCMLAB_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Core(#[from] mcmlab::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code: 2 for bad configs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "mcmlab",
    version,
    about = "Cycle benchmarking of mid-circuit measurements"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; beats the environment variable and the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Output directory precedence: `--out`, then the environment, then the
/// config's `out`, then `mcmlab-out`, the last two relative to the config.
pub fn resolve_out_dir(cli: &Cli, cfg: &RunConfig, base: &std::path::Path, env: Option<PathBuf>) -> PathBuf {
    cli.out
        .clone()
        .or(env)
        .unwrap_or_else(|| base.join(cfg.out.clone().unwrap_or_else(|| PathBuf::from("mcmlab-out"))))
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = RunConfig::load(&cli.config)?;
    if let Some(c) = config.command {
        if c != cli.command {
            return Err(CliError::Config(format!(
                "config is for `{}` but `{}` was requested",
                c.name(),
                cli.command.name()
            )));
        }
    }
    let seed = cli.seed.or(config.seed);
    if cli.command.needs_seed() && seed.is_none() {
        return Err(CliError::Config(format!(
            "a seed is required for {}",
            cli.command.name()
        )));
    }
    let base = cli.config.parent().map(PathBuf::from).unwrap_or_default();
    let env = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let dir = resolve_out_dir(cli, &config, &base, env);
    let mut out = output::OutDir::create(dir, config.format.pretty_json)?;
    let ctx = commands::Context {
        command: cli.command,
        config,
        base,
        seed,
    };
    match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be positive".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| commands::run(&ctx, &mut out))?
        }
        None => commands::run(&ctx, &mut out)?,
    }
    Ok(out.written)
}
