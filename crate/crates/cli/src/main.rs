//! Configuration-driven scenario runner: every library module is exposed as
//! a subcommand that reads a TOML scenario, executes the task and writes a
//! machine-readable report, columnar data files and a run manifest.
//!
//! Exit codes: 0 success, 2 configuration/schema violation, 3 numerical
//! failure, 4 unsupported operation, 1 I/O failure.

mod config;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{parse_config, ScenarioConfig};
use output::OutputDir;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Unsupported(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Unsupported(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "configuration",
            CliError::Numerical(_) => "numerical",
            CliError::Unsupported(_) => "unsupported-operation",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Numerical(m)
            | CliError::Unsupported(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<rockland::Error> for CliError {
    fn from(e: rockland::Error) -> Self {
        match &e {
            rockland::Error::Config(_) => CliError::Config(e.to_string()),
            rockland::Error::Unsupported(_) => CliError::Unsupported(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "rockland",
    version,
    about = "Scenario runner for the pseudo-differential calculus on R^n and the Heisenberg group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    #[arg(long, env = "ROCKLAND_CONFIG")]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long, env = "ROCKLAND_OUTPUT")]
    output: Option<PathBuf>,
    /// Seed; overrides the config's seed.
    #[arg(long, env = "ROCKLAND_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = auto). Recorded in the manifest; results are
    /// deterministic regardless.
    #[arg(long, env = "ROCKLAND_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one seminorm p_{alpha,beta,gamma,m} of a symbol.
    Seminorm(RunArgs),
    /// Tabulate class seminorms with a refinement-stability flag.
    ClassCheck(RunArgs),
    /// Per-point resolvent (a - lambda)^{-1}.
    Resolvent(RunArgs),
    /// Weighted resolvent sups along a spectral curve.
    ParamElliptic(RunArgs),
    /// Parametrix construction and residual-order study.
    Parametrix(RunArgs),
    /// Contour-integral function of a symbol vs the eigendecomposition oracle.
    Funcalc(RunArgs),
    /// Complex power of a positive-definite symbol.
    Power(RunArgs),
    /// Certify the quadratic-form lower bound.
    Garding(RunArgs),
    /// Interpolation constant between Sobolev scales.
    Interpolate(RunArgs),
    /// Solve a diffusion problem and fit energy constants.
    Diffuse(RunArgs),
}

impl Command {
    fn kind_name(&self) -> &'static str {
        match self {
            Command::Seminorm(_) => "seminorm",
            Command::ClassCheck(_) => "class_check",
            Command::Resolvent(_) => "resolvent",
            Command::ParamElliptic(_) => "param_elliptic",
            Command::Parametrix(_) => "parametrix",
            Command::Funcalc(_) => "funcalc",
            Command::Power(_) => "power",
            Command::Garding(_) => "garding",
            Command::Interpolate(_) => "interpolate",
            Command::Diffuse(_) => "diffuse",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Seminorm(a)
            | Command::ClassCheck(a)
            | Command::Resolvent(a)
            | Command::ParamElliptic(a)
            | Command::Funcalc(a)
            | Command::Parametrix(a)
            | Command::Power(a)
            | Command::Garding(a)
            | Command::Interpolate(a)
            | Command::Diffuse(a) => a,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    task: &'a str,
    seed: u64,
    threads: usize,
    output_dir: String,
    wall_ms: u128,
    config_echo: &'a str,
}

fn run(cmd: &Command) -> Result<(), CliError> {
    let args = cmd.args();
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut scenario: ScenarioConfig = parse_config(&raw)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if scenario.task.kind_name() != cmd.kind_name() {
        return Err(CliError::Config(format!(
            "config task kind '{}' does not match subcommand '{}'",
            scenario.task.kind_name(),
            cmd.kind_name()
        )));
    }
    let out_root = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(&scenario.output_dir));
    let out = OutputDir::create(&out_root)?;

    let started = Instant::now();
    tasks::run_scenario(&scenario, &out)?;
    let wall_ms = started.elapsed().as_millis();

    out.write_json(
        "manifest.json",
        &Manifest {
            version: env!("CARGO_PKG_VERSION"),
            task: scenario.task.kind_name(),
            seed: scenario.seed,
            threads: args.threads,
            output_dir: out_root.display().to_string(),
            wall_ms,
            config_echo: &raw,
        },
    )?;
    println!(
        "{}: ok ({} ms, outputs in {})",
        scenario.task.kind_name(),
        wall_ms,
        out_root.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {}", e.category(), e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
