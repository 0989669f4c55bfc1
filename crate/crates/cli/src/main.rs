mod bench;
mod manifest;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::bench::{BenchCsArgs, BenchLaggedArgs};
use crate::problem::{DiagArgs, SolveArgs};

#[derive(Parser, Debug)]
#[command(
    name = "ordsparse",
    version,
    about = "Sparse regression under order constraints"
)]
struct Cli {
    /// Root directory for every artifact.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads for parallel sweeps (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem with DMA or an NPG baseline.
    Solve(SolveArgs),
    /// Stationarity report for a solution.
    Diag(DiagArgs),
    /// Time-limited compressed sensing benchmark over several seeds.
    BenchCs(BenchCsArgs),
    /// Penalty sweep on the time-lagged regression data.
    BenchLagged(BenchLaggedArgs),
}

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Fault(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fault(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Fault(_) => "solver-fault",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Fault(m) => m,
        }
    }
}

impl From<ordsparse::Error> for CliError {
    fn from(e: ordsparse::Error) -> Self {
        match e {
            ordsparse::Error::SolverFault(_) => CliError::Fault(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

fn fail(err: &CliError) -> ExitCode {
    let body = serde_json::json!({
        "error": err.kind(),
        "message": err.message(),
        "exit_code": err.code(),
    });
    eprintln!("{body}");
    ExitCode::from(err.code())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return config_err("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    match cli.command {
        Command::Solve(args) => problem::cmd_solve(&args, &cli.out_dir),
        Command::Diag(args) => problem::cmd_diag(&args, &cli.out_dir),
        Command::BenchCs(args) => bench::cmd_bench_cs(&args, &cli.out_dir),
        Command::BenchLagged(args) => bench::cmd_bench_lagged(&args, &cli.out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Config(e.to_string())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
