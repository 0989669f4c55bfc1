//! Order-constrained compressed sensing with six competing solvers.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gaussian_vec, sorted_gaussian_start};
use crate::constraint::ConstraintSet;
use crate::error::{domain, Error, Result};
use crate::problem::{LeastSquares, Problem};
use crate::regularizer::Regularizer;
use crate::solver::dma::DmaSolver;
use crate::solver::npg::{NpgSolver, ProxSpec};
use crate::solver::{Solver, SolverConfig, StepRule, Termination};

const INSTANCE_STREAM: u64 = 0;
const START_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct CsInstance {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub x_true: Array1<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl CsInstance {
    pub fn dims(&self) -> (usize, usize) {
        (self.a.ncols(), self.a.nrows())
    }

    pub fn least_squares(&self) -> LeastSquares {
        LeastSquares::new(self.a.clone(), self.b.clone(), 1.0).expect("validated at generation")
    }

    /// Initial point shared by all solvers for this instance.
    pub fn initial_point(&self) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(START_STREAM);
        sorted_gaussian_start(&mut rng, self.a.ncols(), self.a.ncols())
    }

    pub fn recovery_error(&self, x: &Array1<f64>) -> f64 {
        let d = x - &self.x_true;
        d.dot(&d).sqrt()
    }
}

/// `b = A x_true + σε` with a column-normalized Gaussian `A` and an `s`-sparse
/// Gaussian `x_true` sorted by nonincreasing magnitude.
pub fn gen_cs_instance(n: usize, m: usize, s: usize, sigma: f64, seed: u64) -> Result<CsInstance> {
    if n == 0 || m == 0 {
        return domain(format!("need n, m >= 1, got n = {n}, m = {m}"));
    }
    if s > n {
        return domain(format!("sparsity {s} exceeds dimension {n}"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return domain(format!("noise level must be nonnegative, got {sigma}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INSTANCE_STREAM);

    let mut nz = gaussian_vec(&mut rng, s).to_vec();
    nz.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut x_true = Array1::zeros(n);
    x_true.slice_mut(ndarray::s![..s]).assign(&Array1::from(nz));

    let mut a = Array2::from_shape_vec((m, n), gaussian_vec(&mut rng, m * n).to_vec())
        .expect("shape matches length");
    for mut col in a.axis_iter_mut(Axis(1)) {
        let norm = col.dot(&col).sqrt();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let noise = gaussian_vec(&mut rng, m);
    let b = a.dot(&x_true) + &(noise * sigma);
    Ok(CsInstance {
        a,
        b,
        x_true,
        sigma,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsAlgorithm {
    DmaLp,
    NpgLp,
    NpgL1c,
    NpgL1,
    DmaLog,
    NpgLog,
}

impl CsAlgorithm {
    pub const ALL: [CsAlgorithm; 6] = [
        CsAlgorithm::DmaLp,
        CsAlgorithm::NpgLp,
        CsAlgorithm::NpgL1c,
        CsAlgorithm::NpgL1,
        CsAlgorithm::DmaLog,
        CsAlgorithm::NpgLog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CsAlgorithm::DmaLp => "DMA_lp",
            CsAlgorithm::NpgLp => "NPG_lp",
            CsAlgorithm::NpgL1c => "NPG_L1c",
            CsAlgorithm::NpgL1 => "NPG_L1",
            CsAlgorithm::DmaLog => "DMA_log",
            CsAlgorithm::NpgLog => "NPG_log",
        }
    }

    pub fn uses_log_penalty(self) -> bool {
        matches!(self, CsAlgorithm::DmaLog | CsAlgorithm::NpgLog)
    }
}

impl fmt::Display for CsAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CsAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CsAlgorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// Model parameters shared by the six algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsModel {
    pub p: f64,
    pub eps: f64,
    /// λ for the four ℓp-type models.
    pub lambda_lp: f64,
    /// λ for the two log models.
    pub lambda_log: f64,
}

impl Default for CsModel {
    fn default() -> Self {
        Self {
            p: 0.5,
            eps: 0.5,
            lambda_lp: 5e-2,
            lambda_log: 8e-2,
        }
    }
}

/// Per-iterate recovery errors and wall times of one solve.
#[derive(Debug, Clone)]
pub struct CsRun {
    pub algorithm: CsAlgorithm,
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    pub x: Array1<f64>,
    pub termination: Termination,
}

impl CsRun {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("at least the initial point")
    }
}

fn traced<R: StepRule>(
    algorithm: CsAlgorithm,
    solver: Solver<R>,
    x_true: &Array1<f64>,
) -> Result<CsRun> {
    let err = |x: &Array1<f64>| {
        let d = x - x_true;
        d.dot(&d).sqrt()
    };
    let mut times = vec![0.0];
    let mut errors = vec![err(solver.x())];
    let res = solver.run_with(|s| {
        times.push(s.records().last().map_or(0.0, |r| r.time_s));
        errors.push(err(s.x()));
    })?;
    Ok(CsRun {
        algorithm,
        times,
        errors,
        x: res.x,
        termination: res.termination,
    })
}

/// Runs one algorithm on `inst` from `x0`.
pub fn run_algorithm(
    inst: &CsInstance,
    algorithm: CsAlgorithm,
    model: &CsModel,
    config: &SolverConfig,
    x0: Array1<f64>,
) -> Result<CsRun> {
    let n = inst.a.ncols();
    let smooth = inst.least_squares();
    let iso = ConstraintSet::isotone(n)?;
    let cfg = config.clone();
    match algorithm {
        CsAlgorithm::DmaLp | CsAlgorithm::DmaLog => {
            let (reg, lambda) = if algorithm == CsAlgorithm::DmaLp {
                (Regularizer::lp(model.p)?, model.lambda_lp)
            } else {
                (Regularizer::log(model.eps)?, model.lambda_log)
            };
            let pb = Problem::new(smooth, reg, lambda, iso)?;
            traced(algorithm, DmaSolver::new(&pb, cfg, x0)?, &inst.x_true)
        }
        _ => {
            let spec = match algorithm {
                CsAlgorithm::NpgLp => ProxSpec::Lp {
                    lambda: model.lambda_lp,
                    p: model.p,
                },
                CsAlgorithm::NpgL1c => ProxSpec::L1Isotone {
                    lambda: model.lambda_lp,
                    constraint: iso,
                },
                CsAlgorithm::NpgL1 => ProxSpec::L1 {
                    lambda: model.lambda_lp,
                },
                _ => ProxSpec::Log {
                    lambda: model.lambda_log,
                    eps: model.eps,
                },
            };
            traced(
                algorithm,
                NpgSolver::new(&smooth, spec, cfg, x0)?,
                &inst.x_true,
            )
        }
    }
}

/// Sampled `E(t)` for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub algorithm: CsAlgorithm,
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    /// `e_r^min` used for normalization (averaged when curves are averaged).
    pub e_r_min: f64,
}

/// Uniform grid of `points` samples on `[0, max_time]`.
pub fn time_grid(max_time: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| max_time * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Normalized error curves of several runs on the same instance.
///
/// `e(k) = (e_r(k) − e_r^min)/(e_r(0) − e_r^min)` where `e_r^min` is the least
/// final error over all runs, and `E(t) = min{e(k) : T(k) ≤ t}`.
pub fn error_curve(runs: &[CsRun], grid: &[f64]) -> Result<Vec<ErrorCurve>> {
    if runs.is_empty() || runs.iter().any(|r| r.errors.is_empty()) {
        return domain("error curves need at least one nonempty trace");
    }
    let e_min = runs
        .iter()
        .map(CsRun::final_error)
        .fold(f64::INFINITY, f64::min);
    Ok(runs
        .iter()
        .map(|run| {
            let denom = run.errors[0] - e_min;
            let e = |err: f64| {
                if denom > 0.0 {
                    (err - e_min) / denom
                } else {
                    0.0
                }
            };
            let mut out = Vec::with_capacity(grid.len());
            let mut k = 0;
            let mut best = f64::INFINITY;
            for &t in grid {
                while k < run.times.len() && run.times[k] <= t {
                    best = best.min(e(run.errors[k]));
                    k += 1;
                }
                out.push(best);
            }
            ErrorCurve {
                algorithm: run.algorithm,
                t: grid.to_vec(),
                e: out,
                e_r_min: e_min,
            }
        })
        .collect())
}

/// Pointwise mean over instances; each inner vector holds one curve per algorithm
/// in the same order.
pub fn average_curves(per_instance: &[Vec<ErrorCurve>]) -> Result<Vec<ErrorCurve>> {
    let Some(first) = per_instance.first() else {
        return domain("nothing to average");
    };
    let count = per_instance.len() as f64;
    let mut out = first.clone();
    for (j, curve) in out.iter_mut().enumerate() {
        for inst in &per_instance[1..] {
            let other = inst
                .get(j)
                .filter(|c| c.algorithm == curve.algorithm && c.t == curve.t)
                .ok_or_else(|| Error::Domain("curve sets do not line up".into()))?;
            for (a, b) in curve.e.iter_mut().zip(&other.e) {
                *a += b;
            }
            curve.e_r_min += other.e_r_min;
        }
        curve.e.iter_mut().for_each(|a| *a /= count);
        curve.e_r_min /= count;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsBenchConfig {
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub max_time_s: f64,
    pub grid_points: usize,
    pub model: CsModel,
    pub algorithms: Vec<CsAlgorithm>,
    /// Solve seeds concurrently. Wall-clock curves are then measured under contention.
    pub parallel: bool,
}

impl CsBenchConfig {
    /// The small desk-scale triple with ten seeds.
    pub fn desk() -> Self {
        Self {
            n: 256,
            m: 54,
            s: 18,
            sigma: 0.1,
            seeds: (0..10).collect(),
            max_time_s: 0.5,
            grid_points: 200,
            model: CsModel::default(),
            algorithms: CsAlgorithm::ALL.to_vec(),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_errors: Vec<(CsAlgorithm, f64)>,
    pub iterations: Vec<(CsAlgorithm, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsBenchReport {
    pub curves: Vec<ErrorCurve>,
    pub seeds: Vec<SeedSummary>,
}

/// Time-limited runs of every algorithm on every seed, averaged into `E(t)`.
pub fn run_cs_bench(cfg: &CsBenchConfig) -> Result<CsBenchReport> {
    if cfg.algorithms.is_empty() || cfg.seeds.is_empty() {
        return domain("benchmark needs at least one algorithm and one seed");
    }
    let config = SolverConfig::default()
        .with_tol_step(0.0)
        .with_max_time(cfg.max_time_s);
    let grid = time_grid(cfg.max_time_s, cfg.grid_points);
    let one = |seed: u64| -> Result<(Vec<ErrorCurve>, SeedSummary)> {
        let inst = gen_cs_instance(cfg.n, cfg.m, cfg.s, cfg.sigma, seed)?;
        let x0 = inst.initial_point();
        let runs = cfg
            .algorithms
            .iter()
            .map(|&alg| run_algorithm(&inst, alg, &cfg.model, &config, x0.clone()))
            .collect::<Result<Vec<_>>>()?;
        let summary = SeedSummary {
            seed,
            final_errors: runs
                .iter()
                .map(|r| (r.algorithm, r.final_error()))
                .collect(),
            iterations: runs
                .iter()
                .map(|r| (r.algorithm, r.errors.len() - 1))
                .collect(),
        };
        Ok((error_curve(&runs, &grid)?, summary))
    };
    let results: Vec<_> = if cfg.parallel {
        cfg.seeds
            .par_iter()
            .map(|&s| one(s))
            .collect::<Result<_>>()?
    } else {
        cfg.seeds.iter().map(|&s| one(s)).collect::<Result<_>>()?
    };
    let (curves, seeds): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(CsBenchReport {
        curves: average_curves(&curves)?,
        seeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_run(alg: CsAlgorithm, times: &[f64], errors: &[f64]) -> CsRun {
        CsRun {
            algorithm: alg,
            times: times.to_vec(),
            errors: errors.to_vec(),
            x: Array1::zeros(1),
            termination: Termination::MaxTime,
        }
    }

    #[test]
    fn trivial_instance() {
        let inst = gen_cs_instance(4, 2, 0, 0.0, 5).unwrap();
        assert_eq!(inst.x_true, Array1::<f64>::zeros(4));
        assert_eq!(inst.b, Array1::<f64>::zeros(2));
    }

    #[test]
    fn instance_structure() {
        let inst = gen_cs_instance(50, 20, 7, 0.1, 42).unwrap();
        for col in inst.a.axis_iter(Axis(1)) {
            assert!((col.dot(&col).sqrt() - 1.0).abs() <= 1e-12);
        }
        assert_eq!(inst.x_true.iter().filter(|v| **v != 0.0).count(), 7);
        assert!(inst
            .x_true
            .windows(2)
            .into_iter()
            .all(|w| w[0].abs() >= w[1].abs()));
        let again = gen_cs_instance(50, 20, 7, 0.1, 42).unwrap();
        assert_eq!(inst.a, again.a);
        assert_eq!(inst.b, again.b);
        assert_eq!(inst.initial_point(), again.initial_point());
        assert!(gen_cs_instance(5, 2, 6, 0.1, 0).is_err());
    }

    #[test]
    fn toy_error_curves_match_prefix_minimum() {
        let runs = vec![
            toy_run(
                CsAlgorithm::DmaLp,
                &[0.0, 1.0, 2.0, 3.0],
                &[5.0, 3.0, 4.0, 1.0],
            ),
            toy_run(CsAlgorithm::NpgL1, &[0.0, 0.5, 2.5], &[5.0, 2.0, 3.0]),
        ];
        let grid = [0.0, 0.6, 1.0, 2.0, 2.6, 3.0];
        let curves = error_curve(&runs, &grid).unwrap();
        // e_min = 1, denominators 4
        assert_eq!(curves[0].e_r_min, 1.0);
        assert_eq!(curves[0].e, vec![1.0, 1.0, 0.5, 0.5, 0.5, 0.0]);
        assert_eq!(curves[1].e, vec![1.0, 0.25, 0.25, 0.25, 0.25, 0.25]);
        let avg = average_curves(&[curves.clone(), curves]).unwrap();
        assert_eq!(avg[0].e, vec![1.0, 1.0, 0.5, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for alg in CsAlgorithm::ALL {
            assert_eq!(alg.name().parse::<CsAlgorithm>().unwrap(), alg);
        }
        assert!("foo".parse::<CsAlgorithm>().is_err());
    }

    #[test]
    fn short_bench_has_expected_shape() {
        let cfg = CsBenchConfig {
            n: 32,
            m: 12,
            s: 4,
            seeds: vec![1, 2],
            max_time_s: 0.02,
            grid_points: 50,
            ..CsBenchConfig::desk()
        };
        let rep = run_cs_bench(&cfg).unwrap();
        assert_eq!(rep.curves.len(), 6);
        for c in &rep.curves {
            assert_eq!(c.e.len(), 50);
            assert_eq!(c.e[0], 1.0);
            assert!(c.e.windows(2).all(|w| w[1] <= w[0]));
        }
        assert_eq!(rep.seeds.len(), 2);
    }
}
