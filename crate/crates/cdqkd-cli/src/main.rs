//! `cdqkd` — command-line front end for the coincidence-detection QKD
//! simulator. One subcommand per experiment mode; every run writes CSV
//! outputs plus a manifest sufficient to reproduce them exactly.

mod config;
mod csvout;
mod manifest;
mod modes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Mode;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration: exit code 2, one diagnostic per failure.
    Config(Vec<String>),
    /// Failure while running: exit code 3.
    Runtime(String),
}

impl From<cdqkd_core::Error> for CliError {
    fn from(e: cdqkd_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "cdqkd",
    version,
    about = "Photon-number-resolved BB84 simulator with coincidence-detection monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Configuration file (plain config or a manifest from a previous run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding `monte_carlo.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per logical CPU). Outputs do not
    /// depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Configuration edits of the form `section.key=value`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate versus channel length, one curve per source intensity
    Fig2(RunArgs),
    /// Coincidence-detection versus decoy-state rate over distance
    Fig3(RunArgs),
    /// Optimal mean photon number over distance for both protocols
    Fig4(RunArgs),
    /// Expected versus simulated coincidence counts per intensity
    Table3(RunArgs),
    /// Abort rate versus threshold under each eavesdropper strategy
    EveRoc(RunArgs),
    /// Single Monte Carlo run with summary and optional click log
    MonteCarlo(RunArgs),
    /// Parse and validate a configuration, reporting every failure
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(issues)) => {
            for issue in issues {
                eprintln!("config error: {issue}");
            }
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Fig2(args) => (Mode::Fig2, args),
        Command::Fig3(args) => (Mode::Fig3, args),
        Command::Fig4(args) => (Mode::Fig4, args),
        Command::Table3(args) => (Mode::Table3, args),
        Command::EveRoc(args) => (Mode::EveRoc, args),
        Command::MonteCarlo(args) => (Mode::MonteCarlo, args),
        Command::Validate { config: path } => {
            let loaded = config::load(Some(&path), &[], None, None)?;
            let issues = config::validate(&loaded);
            if !issues.is_empty() {
                return Err(CliError::Config(issues));
            }
            let text =
                toml::to_string_pretty(&loaded).map_err(|e| CliError::Runtime(e.to_string()))?;
            print!("{text}");
            return Ok(());
        }
    };

    let loaded = config::load(
        args.config.as_deref(),
        &args.overrides,
        args.seed,
        args.out.as_deref(),
    )?;
    if let Some(pinned) = loaded.mode {
        if pinned != mode {
            return Err(CliError::Config(vec![format!(
                "mode: config pins '{pinned}' but the '{mode}' subcommand was invoked"
            )]));
        }
    }
    let issues = config::validate(&loaded);
    if !issues.is_empty() {
        return Err(CliError::Config(issues));
    }

    let run = || modes::run(mode, &loaded);
    let files = match args.threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(run)?
        }
        _ => run()?,
    };

    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}
