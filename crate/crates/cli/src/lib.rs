//! `relstab` command-line harness: corpus generation, training, corruption,
//! explanation, RSSA analysis, corruption sweeps and plotting.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod table;

use std::ffi::OsString;
use std::path::Path;

use clap::Parser;

pub use args::{Cli, Command, PlotKind};
pub use config::{ExperimentConfig, SweepKind};
pub use error::{CliError, CliResult};

/// Defaults, then the config file, then `--set`, then the global flags.
pub fn resolve_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = resolve_config(&cli)?;
    match cli.command {
        Command::Generate => {
            cfg.validate()?;
            commands::generate(&cfg)
        }
        Command::Train { corpus, epochs } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            commands::train(&cfg)
        }
        Command::Corrupt { corpus, kind, lambda, fraction } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            cfg.validate()?;
            commands::corrupt(&cfg, kind.parse()?, lambda, fraction)
        }
        Command::Explain { corpus, checkpoint, ids, explainers } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            if let Some(c) = checkpoint {
                cfg.checkpoint = c;
            }
            if let Some(list) = explainers {
                cfg.explainers = config::parse_explainers(&list)?;
            }
            cfg.validate()?;
            commands::explain(&cfg, &ids)
        }
        Command::Rssa { corpus, checkpoint } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            if let Some(c) = checkpoint {
                cfg.checkpoint = c;
            }
            cfg.validate()?;
            commands::rssa(&cfg)
        }
        Command::Sweep { corpus, test_only } => {
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            cfg.test_only |= test_only;
            cfg.validate()?;
            commands::sweep(&cfg)
        }
        Command::Plot { input, kind, select } => {
            let out = cli.out.unwrap_or_else(|| input.with_extension("svg"));
            commands::plot(&input, kind, select.as_deref(), &out)
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Writes a text file through a `.partial` temporary.
pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    Ok(relstab_core::fsutil::write_atomic(path, text.as_bytes())?)
}
