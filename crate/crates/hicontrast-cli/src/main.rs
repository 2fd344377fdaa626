//! Batch driver: JSON config in, hashed CSV tables and SVG plots out.

mod commands;
mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::output::Artifacts;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure in {stage}: {message}")]
    Numerical { stage: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "hicontrast", version, about = "Scattering, spectra and shape recovery for high-contrast inclusions")]
struct Cli {
    /// Experiment config (JSON, schema version 1). Defaults apply without it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Noise seed; overrides `noise.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Coarse discretisation (256 nodes, N = 12) for quick runs.
    #[arg(long, global = true)]
    fast: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectra and eigenfunctions of the radial operators.
    Eigen,
    /// Scattering coefficients of the configured shape.
    Forward,
    /// Offset ratios of the scattering coefficients over the contrasts.
    Sweep,
    /// Noisy data, linearised mode recovery and boundary reconstruction.
    Invert,
    /// Runs one of the two bundled experiments (sweep then inversion).
    Reproduce {
        #[arg(value_enum)]
        example: Example,
    },
    /// Prints the effective config as JSON.
    ShowConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Example1,
    Example2,
}

fn effective(cli: &Cli, mut cfg: ExperimentConfig) -> Result<ExperimentConfig, CliError> {
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if cli.fast {
        cfg.make_fast();
    }
    cfg.checked()
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig, default: &str) -> PathBuf {
    cli.out.clone().or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| Path::new("out").join(default))
}

type Runner = fn(&ExperimentConfig, &mut Artifacts) -> Result<Vec<String>, CliError>;

fn execute(name: &str, run: Runner, cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    let mut out = Artifacts::create(dir, cfg)?;
    let notes = run(cfg, &mut out)?;
    for n in &notes {
        eprintln!("note: {n}");
    }
    let dir = out.finish(name, cfg, &notes)?;
    eprintln!("{name}: wrote {} (config_sha256={})", dir.display(), cfg.sha256());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let loaded = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let single = |name: &str, run: Runner| -> Result<(), CliError> {
        let cfg = effective(cli, loaded.clone())?;
        execute(name, run, &cfg, &out_dir(cli, &cfg, name))
    };
    match &cli.command {
        Command::Eigen => single("eigen", commands::eigen),
        Command::Forward => single("forward", commands::forward),
        Command::Sweep => single("sweep", commands::sweep),
        Command::Invert => single("invert", commands::invert),
        Command::ShowConfig => {
            let cfg = effective(cli, loaded.clone())?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serialises"));
            Ok(())
        }
        Command::Reproduce { example } => {
            let (tag, which) = match example {
                Example::Example1 => ("example1", 1),
                Example::Example2 => ("example2", 2),
            };
            let (sweep, invert) = commands::example(which);
            let root = cli.out.clone().unwrap_or_else(|| Path::new("out").join(tag));
            std::fs::create_dir_all(&root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
            for (name, cfg, runner) in [("sweep", sweep, commands::sweep as Runner), ("invert", invert, commands::invert as Runner)] {
                let cfg = effective(cli, cfg)?;
                let path = root.join(format!("{name}.json"));
                let text = serde_json::to_string_pretty(&cfg).expect("config serialises") + "\n";
                std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                execute(name, runner, &cfg, &root.join(name))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
