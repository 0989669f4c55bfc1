//! `solve` and `diag`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use ndarray::Array1;
use serde::Serialize;

use ordsparse::diagnostics::{
    check_unconstrained_stationarity, finite_diff_gradient_check, psi_opt_residual, CoordCheck,
};
use ordsparse::experiment::seeded_sorted_start;
use ordsparse::io::{
    read_matrix_file, read_trace_file, read_vector_file, write_trace_file, write_vector_file,
};
use ordsparse::{
    dma_solve, npg_solve, ConstraintSet, LeastSquares, Problem, ProxSpec, Regularizer, SolverConfig,
};

use crate::manifest::RunManifest;
use crate::{config_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum RegKind {
    L1,
    Lp,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OmegaKind {
    Nonneg,
    Isotone,
    BlockIsotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Algorithm {
    Dma,
    Npg,
}

/// Data, penalty and constraint shared by `solve` and `diag`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ProblemArgs {
    /// Design matrix, comma-separated without header.
    #[arg(long = "A", value_name = "FILE")]
    pub a: PathBuf,
    /// Response vector, one value per line.
    #[arg(long = "b", value_name = "FILE")]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value = "lp")]
    pub reg: RegKind,
    /// Exponent of the lp penalty.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Shape parameter of the log penalty.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "isotone")]
    pub omega: OmegaKind,
    /// Block length for `--omega block-isotone`.
    #[arg(long)]
    pub block_len: Option<usize>,
    #[arg(long)]
    pub lambda: f64,
    /// Multiplier of the least squares term.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

impl ProblemArgs {
    fn least_squares(&self) -> CliResult<LeastSquares> {
        let a = read_matrix_file(&self.a)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.a.display())))?;
        let b = read_vector_file(&self.b)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.b.display())))?;
        Ok(LeastSquares::new(a, b, self.scale)?)
    }

    fn constraint(&self, n: usize) -> CliResult<ConstraintSet> {
        match (self.omega, self.block_len) {
            (OmegaKind::Nonneg, None) => Ok(ConstraintSet::nonneg(n)?),
            (OmegaKind::Isotone, None) => Ok(ConstraintSet::isotone(n)?),
            (OmegaKind::BlockIsotone, Some(k)) => Ok(ConstraintSet::block_isotone(n, k)?),
            (OmegaKind::BlockIsotone, None) => {
                config_err("--omega block-isotone needs --block-len")
            }
            (_, Some(_)) => config_err("--block-len only applies to --omega block-isotone"),
        }
    }

    fn regularizer(&self) -> CliResult<Regularizer> {
        Ok(match self.reg {
            RegKind::L1 => Regularizer::linear(),
            RegKind::Lp => Regularizer::lp(self.p)?,
            RegKind::Log => Regularizer::log(self.eps)?,
        })
    }

    fn problem(&self, smooth: LeastSquares) -> CliResult<Problem> {
        let cs = self.constraint(smooth.dim())?;
        Ok(Problem::new(smooth, self.regularizer()?, self.lambda, cs)?)
    }

    /// Proximal baseline for this penalty and constraint. The lp prox is
    /// available for any exponent in (0, 1).
    fn prox_spec(&self, n: usize) -> CliResult<ProxSpec> {
        let lambda = self.lambda;
        let spec = match (self.reg, self.omega) {
            (RegKind::L1, OmegaKind::Nonneg) => ProxSpec::L1 { lambda },
            (RegKind::L1, _) => ProxSpec::L1Isotone {
                lambda,
                constraint: self.constraint(n)?,
            },
            (RegKind::Lp, OmegaKind::Nonneg) => ProxSpec::Lp { lambda, p: self.p },
            (RegKind::Log, OmegaKind::Nonneg) => ProxSpec::Log {
                lambda,
                eps: self.eps,
            },
            (reg, omega) => {
                return config_err(format!(
                    "npg has no proximal map for {reg:?} under {omega:?}; use --alg dma or --omega nonneg"
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "dma")]
    pub alg: Algorithm,
    /// `zero`, `random:<seed>` or a vector file.
    #[arg(long, default_value = "zero")]
    pub x0: String,
    /// Relative step tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub maxtime: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Trace file, relative to --out-dir.
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

enum Start {
    Zero,
    Random(u64),
    File(PathBuf),
}

fn parse_start(s: &str) -> CliResult<Start> {
    if s == "zero" {
        Ok(Start::Zero)
    } else if let Some(seed) = s.strip_prefix("random:") {
        seed.parse()
            .map(Start::Random)
            .map_err(|_| CliError::Config(format!("bad seed in --x0 {s:?}")))
    } else {
        Ok(Start::File(PathBuf::from(s)))
    }
}

fn initial_point(start: &Start, n: usize, run_len: usize) -> CliResult<Array1<f64>> {
    match start {
        Start::Zero => Ok(Array1::zeros(n)),
        Start::Random(seed) => Ok(seeded_sorted_start(*seed, n, run_len)),
        Start::File(path) => {
            read_vector_file(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }
}

pub fn cmd_solve(args: &SolveArgs, out_dir: &Path) -> CliResult<()> {
    let started = Instant::now();
    let start = parse_start(&args.x0)?;
    let mut config = SolverConfig::default()
        .with_tol_step(args.tol)
        .with_max_iters(args.max_iters);
    if let Some(t) = args.maxtime {
        config = config.with_max_time(t);
    }
    config.validate()?;

    let smooth = args.problem.least_squares()?;
    let n = smooth.dim();
    let result = match args.alg {
        Algorithm::Dma => {
            let pb = args.problem.problem(smooth)?;
            let x0 = initial_point(&start, n, pb.constraint().run_len())?;
            dma_solve(&pb, &config, x0)?
        }
        Algorithm::Npg => {
            let spec = args.problem.prox_spec(n)?;
            let run_len = match &spec {
                ProxSpec::L1Isotone { constraint, .. } => constraint.run_len(),
                _ => 1,
            };
            let x0 = initial_point(&start, n, run_len)?;
            npg_solve(&smooth, &spec, &config, x0)?
        }
    };

    let trace = out_dir.join(&args.out);
    let x_final = out_dir.join("x_final.csv");
    write_trace_file(&trace, &result.records)?;
    write_vector_file(&x_final, &result.x)?;

    let mut manifest = RunManifest::new(
        "solve",
        out_dir,
        serde_json::json!({ "args": args, "solver": config }),
    );
    if let Start::Random(seed) = start {
        manifest.seeds.push(seed);
    }
    manifest.add_output(&trace)?;
    manifest.add_output(&x_final)?;
    manifest.metrics = serde_json::json!({
        "termination": result.termination,
        "iterations": result.iterations(),
        "final_objective": result.final_objective(),
        "last_gamma": result.last_gamma(),
        "last_eta": result.last_eta(),
        "nonzeros": result.x.iter().filter(|v| **v != 0.0).count(),
    });
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    manifest.write()?;
    println!("{}", serde_json::to_string(&manifest.metrics)?);
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DiagArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Trace written by `solve`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Point to examine.
    #[arg(long, default_value = "x_final.csv")]
    pub x: PathBuf,
    /// Stationarity parameter; defaults to the last accepted eta in the trace.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Tolerance of the coordinatewise checks (orthant only).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Report file, relative to --out-dir.
    #[arg(long, default_value = "diag.json")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct DiagReport {
    iterations: usize,
    trace_objective: Option<f64>,
    objective: Option<f64>,
    feasible: bool,
    eta: f64,
    residual: f64,
    residual_over_eta: f64,
    coordinate_failures: Option<usize>,
    coordinate_vacuous: Option<usize>,
    gradient_fd_error: f64,
}

pub fn cmd_diag(args: &DiagArgs, out_dir: &Path) -> CliResult<()> {
    let trace = read_trace_file(&args.trace)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.trace.display())))?;
    let x = read_vector_file(&args.x)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.x.display())))?;
    let pb = args.problem.problem(args.problem.least_squares()?)?;
    if x.len() != pb.dim() {
        return config_err(format!(
            "x has {} entries, the problem has {}",
            x.len(),
            pb.dim()
        ));
    }
    let eta = match args.eta.or_else(|| trace.iter().rev().find_map(|r| r.eta)) {
        Some(eta) => eta,
        None => return config_err("trace has no eta column values; pass --eta"),
    };
    let feasible = pb.is_feasible(&x);
    if !feasible {
        return config_err("x is infeasible for the constraint set");
    }
    let report = psi_opt_residual(&pb, &x, eta)?;
    let checks = if matches!(args.problem.omega, OmegaKind::Nonneg) {
        Some(check_unconstrained_stationarity(&pb, &x, args.tol)?)
    } else {
        None
    };
    let count = |c: CoordCheck| {
        checks
            .as_ref()
            .map(|v| v.iter().filter(|k| **k == c).count())
    };
    let out = DiagReport {
        iterations: trace.last().map_or(0, |r| r.k),
        trace_objective: trace.last().map(|r| r.objective),
        objective: pb.full_objective(&x)?.finite(),
        feasible,
        eta,
        residual: report.residual,
        residual_over_eta: report.residual / eta,
        coordinate_failures: count(CoordCheck::Fail),
        coordinate_vacuous: count(CoordCheck::Vacuous),
        gradient_fd_error: finite_diff_gradient_check(&pb, &x, 1e-6)?,
    };
    let text = serde_json::to_string_pretty(&out)?;
    std::fs::write(out_dir.join(&args.out), &text)?;
    println!("{text}");
    Ok(())
}
