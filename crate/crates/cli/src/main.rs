//! `apdet`: batch experiment runner for determinant asymptotics of band
//! operators with almost periodic diagonals.
//!
//! One subcommand per experiment kind reads a JSON config, validates it,
//! computes the result table, and writes a CSV whose '#' header records
//! enough provenance to recompute every number from the config alone.
//! Exit code 0 is a clean run, 1 a config or validation failure, 2 a
//! numerical failure (ladder exhaustion, non-finite values); on exit 2 the
//! CSV is still written with the failing rows flagged.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::{validate, ExperimentConfig, Kind, Severity};
use run::{RunSettings, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Rejected before any numerics ran; exit code 1.
    #[error("{0}")]
    Config(String),
    /// Numerics started and could not finish; exit code 2.
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(
    name = "apdet",
    version,
    about = "Determinant ratio experiments for almost periodic band operators",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (default: the config's `out`, then `<kind>.csv`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for row computation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Run even when the compatibility audit is at machine zero.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Window sums of an almost periodic sequence against the closed form.
    Trace(RunArgs),
    /// Determinant/growth ratios of a factored operator along windows.
    Ratio(RunArgs),
    /// Ratio residuals against theta products over a gap-by-offset grid.
    Uniform(RunArgs),
    /// Theta limit constants by truncated-determinant ladder.
    Theta(RunArgs),
    /// Block Laurent symbols through the scalar embedding.
    SzegoBlock(RunArgs),
    /// Shifted almost Mathieu operators along fractal windows.
    Mathieu(RunArgs),
    /// Compatibility constant search for a group/weight pair.
    AuditWeight(RunArgs),
    /// Check a config and print findings without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Command {
    fn kind(&self) -> Option<Kind> {
        match self {
            Command::Trace(_) => Some(Kind::Trace),
            Command::Ratio(_) => Some(Kind::Ratio),
            Command::Uniform(_) => Some(Kind::Uniform),
            Command::Theta(_) => Some(Kind::Theta),
            Command::SzegoBlock(_) => Some(Kind::SzegoBlock),
            Command::Mathieu(_) => Some(Kind::Mathieu),
            Command::AuditWeight(_) => Some(Kind::AuditWeight),
            Command::Validate { .. } => None,
        }
    }

    fn args(self) -> Option<RunArgs> {
        match self {
            Command::Trace(a)
            | Command::Ratio(a)
            | Command::Uniform(a)
            | Command::Theta(a)
            | Command::SzegoBlock(a)
            | Command::Mathieu(a)
            | Command::AuditWeight(a) => Some(a),
            Command::Validate { .. } => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("apdet: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(1),
                CliError::Numerical(_) | CliError::Io(_) => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, CliError> {
    let size_cap = size_cap()?;

    if let Command::Validate { config } = &command {
        let (parsed, _) = load_config(config)?;
        let findings = validate(&parsed, size_cap);
        for f in &findings {
            println!("{f}");
        }
        if findings.is_empty() {
            println!("no findings");
        }
        let bad = findings.iter().any(|f| f.severity == Severity::Error);
        return Ok(ExitCode::from(if bad { 1 } else { 0 }));
    }

    let kind = command.kind().expect("validate handled above");
    let args = command.args().expect("validate handled above");
    let (parsed, bytes) = load_config(&args.config)?;
    if parsed.kind != kind {
        return Err(CliError::Config(format!(
            "config kind `{}` does not match subcommand `{kind}`",
            parsed.kind
        )));
    }

    let findings = validate(&parsed, size_cap);
    let mut blocked = false;
    for f in &findings {
        eprintln!("apdet: {f}");
        blocked |= f.severity == Severity::Error;
    }
    if blocked {
        return Ok(ExitCode::from(1));
    }

    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }

    let settings = RunSettings {
        config_path: args.config,
        config_bytes: bytes,
        out_override: args.out,
        size_cap,
        force: args.force,
    };
    let RunSummary {
        out_path,
        rows,
        failed_rows,
    } = run::run(&parsed, &settings)?;

    if failed_rows > 0 {
        eprintln!(
            "apdet: wrote {rows} rows to {} with {failed_rows} flagged as failed",
            out_path.display()
        );
        Ok(ExitCode::from(2))
    } else {
        eprintln!("apdet: wrote {rows} rows to {}", out_path.display());
        Ok(ExitCode::from(0))
    }
}

fn load_config(path: &PathBuf) -> Result<(ExperimentConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let parsed = ExperimentConfig::parse(text)?;
    Ok((parsed, bytes))
}

/// Window cap for materialized sections; `APDET_SIZE_CAP` overrides the
/// library default.
fn size_cap() -> Result<usize, CliError> {
    match std::env::var("APDET_SIZE_CAP") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| {
                CliError::Config(format!(
                    "APDET_SIZE_CAP must be a positive integer, got {s:?}"
                ))
            }),
        Err(std::env::VarError::NotPresent) => Ok(apdet_core::linalg::DEFAULT_SIZE_CAP),
        Err(e) => Err(CliError::Config(format!("APDET_SIZE_CAP: {e}"))),
    }
}
