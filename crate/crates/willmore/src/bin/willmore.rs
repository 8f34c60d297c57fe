//! Command-line entry point. See `willmore::cli` for the command semantics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use willmore::cli::{emit, run, RunConfig};

#[derive(Parser)]
#[command(
    name = "willmore",
    about = "Diagnostics for long Willmore cylinder necks",
    after_help = "Commands: verify-willmore, residues, spectra, three-circle, \
                  neck, identities, audit.\n\
                  Config keys equal the --set names; flags override the file."
)]
struct Cli {
    /// Command to run.
    command: String,

    /// Key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set l=0.05 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Write the report and artifacts into this directory instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Also emit CSV artifacts.
    #[arg(long)]
    csv: bool,

    /// Random seed for the stochastic suites.
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(cli: &Cli) -> willmore::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for s in &cli.sets {
        let (key, value) = s.split_once('=').ok_or_else(|| {
            willmore::Error::Domain(format!("--set expects KEY=VALUE, got {s}"))
        })?;
        cfg.apply(key.trim(), value.trim())?;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = Some(dir.display().to_string());
    }
    if cli.csv {
        cfg.csv = true;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cli.command, &cfg) {
        Ok(outcome) => {
            if let Err(e) = emit(&outcome, &cli.command, &cfg) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if outcome.all_pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertion failure, see report");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
