//! Nonmonotone line-search driver shared by DMA and the NPG baselines.
//!
//! Each outer iteration proposes a Barzilai–Borwein stepsize `γ̃`, asks the
//! step rule for a trial point `ũ`, and accepts it once
//!
//! ```text
//! F(ũ) ≤ max_{[k−M]_+ ≤ i ≤ k} F(x^i) − (c₁/2)‖ũ − x^k‖²
//! ```
//!
//! holds, shrinking `γ̃ ← τγ̃` otherwise.
//!
//! Close to convergence `F(ũ)` and the window maximum agree in almost all
//! digits, so the test is evaluated on differences: `F(ũ) − F(x^k)` is formed
//! from `A(ũ − x^k)` and the current residual, and the window maximum is kept
//! as accumulated per-step changes relative to `F(x^k)`.

pub mod dma;
pub mod npg;

use std::collections::VecDeque;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::problem::LeastSquares;

/// Bounds on the BB proposal.
pub const BB_MIN: f64 = 1e-8;
pub const BB_MAX: f64 = 1e8;

/// Cap on `γ̃` backtracks per outer iteration.
pub const MAX_GAMMA_BACKTRACKS: usize = 200;

/// How `η̃` is initialized at the start of each inner search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaRule {
    /// Start from `eta_init`.
    Fixed,
    /// Start from `1/γ̃`. With `ψ(t) = t` this makes DMA coincide with NPG.
    InverseGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub c1: f64,
    pub tau: f64,
    /// Nonmonotone window `M`; the reference value is the max of the last `M + 1` objectives.
    pub memory: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_init: f64,
    pub eta_rule: EtaRule,
    pub max_iters: usize,
    pub max_time_s: Option<f64>,
    /// Stop once `‖x^k − x^{k−1}‖ / max(1, ‖x^k‖)` falls below this.
    pub tol_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            tau: 0.5,
            memory: 4,
            gamma_min: 1e-8,
            gamma_max: 1e8,
            eta_min: 1e-8,
            eta_max: 1.0,
            eta_init: 1.0,
            eta_rule: EtaRule::Fixed,
            max_iters: 100_000,
            max_time_s: None,
            tol_step: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) {
            return domain(format!("c1 must be positive, got {}", self.c1));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return domain(format!("tau must lie in (0, 1), got {}", self.tau));
        }
        if !(self.gamma_min > 0.0 && self.gamma_min <= self.gamma_max) {
            return domain(format!(
                "need 0 < gamma_min <= gamma_max, got [{}, {}]",
                self.gamma_min, self.gamma_max
            ));
        }
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_max) {
            return domain(format!(
                "need 0 < eta_min <= eta_max, got [{}, {}]",
                self.eta_min, self.eta_max
            ));
        }
        if !(self.eta_init >= self.eta_min && self.eta_init <= self.eta_max) {
            return domain(format!(
                "eta_init {} outside [{}, {}]",
                self.eta_init, self.eta_min, self.eta_max
            ));
        }
        if !(self.tol_step >= 0.0) {
            return domain(format!(
                "tol_step must be nonnegative, got {}",
                self.tol_step
            ));
        }
        if let Some(t) = self.max_time_s {
            if !(t > 0.0) {
                return domain(format!("max_time_s must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn with_tol_step(mut self, tol: f64) -> Self {
        self.tol_step = tol;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_max_time(mut self, seconds: f64) -> Self {
        self.max_time_s = Some(seconds);
        self
    }

    pub fn with_eta_rule(mut self, rule: EtaRule) -> Self {
        self.eta_rule = rule;
        self
    }
}

/// Barzilai–Borwein proposal `‖d‖² / (scale·‖Ad‖²)` with `d = x^k − x^{k−1}`,
/// clipped to `[1e-8, 1e8]`. Returns 1 when there is no previous iterate and
/// the upper clip when `Ad = 0`.
pub fn bb_stepsize(x: &Array1<f64>, prev: Option<&Array1<f64>>, smooth: &LeastSquares) -> f64 {
    let Some(prev) = prev else {
        return 1.0;
    };
    let d = x - prev;
    bb_ratio(d.dot(&d), smooth.curvature(&d))
}

fn bb_ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        return BB_MAX;
    }
    (num / den).clamp(BB_MIN, BB_MAX)
}

/// One row of the run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// `F(x^k)`
    pub objective: f64,
    /// Accepted `γ_{k−1}`; absent for the initial point.
    pub gamma: Option<f64>,
    /// Accepted `η̄_{k−1}` (DMA only).
    pub eta: Option<f64>,
    /// `‖x^k − x^{k−1}‖`
    pub step_norm: f64,
    /// Wall time until `x^k` was obtained.
    pub time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    StepTolerance,
    MaxIters,
    MaxTime,
    /// The line search candidate coincided with the iterate up to rounding.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x: Array1<f64>,
    /// Final `v = ψ(|x|)` maintained by DMA.
    pub v: Option<Array1<f64>>,
    pub records: Vec<IterRecord>,
    pub termination: Termination,
}

impl RunResult {
    /// Last accepted `η̄_k`, if the solver tracks one.
    pub fn last_eta(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.eta)
    }

    pub fn last_gamma(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.gamma)
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// `|u_i − x_i| ≤ 4ε·max(|u_i|, |x_i|)` for every coordinate.
fn within_rounding(u: &Array1<f64>, x: &Array1<f64>) -> bool {
    u.iter()
        .zip(x)
        .all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()))
}

/// Candidate produced by a step rule for a given `γ̃`.
#[derive(Debug, Clone)]
pub struct Trial {
    pub u: Array1<f64>,
    pub v: Option<Array1<f64>>,
    pub eta: Option<f64>,
    pub eta_trials: usize,
}

/// The part of an outer iteration that differs between solvers.
pub trait StepRule {
    fn smooth(&self) -> &LeastSquares;

    /// Nonsmooth part of `F` at a feasible point.
    fn penalty(&self, x: &Array1<f64>) -> f64;

    /// `penalty(u) − penalty(x)`, accumulated coordinatewise.
    fn penalty_change(&self, x: &Array1<f64>, u: &Array1<f64>) -> f64;

    fn trial(&mut self, x: &Array1<f64>, grad: &Array1<f64>, gamma: f64) -> Result<Trial>;

    fn accept(&mut self, _trial: &Trial) {}

    fn state_v(&self) -> Option<&Array1<f64>> {
        None
    }

    /// `F` at a feasible point.
    fn objective(&self, x: &Array1<f64>) -> f64 {
        self.smooth().value_unchecked(x) + self.penalty(x)
    }
}

/// Summary of an accepted outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedStep {
    /// Index of the new iterate.
    pub k: usize,
    pub objective: f64,
    /// Window maximum `max_{[k−M]_+ ≤ i ≤ k} F(x^i)` used in the test.
    pub reference: f64,
    /// `γ̃` proposed before any backtracking.
    pub gamma_proposed: f64,
    pub gamma: f64,
    pub eta: Option<f64>,
    pub gamma_trials: usize,
    pub eta_trials: usize,
    pub step_norm: f64,
}

pub struct Solver<R: StepRule> {
    rule: R,
    config: SolverConfig,
    x: Array1<f64>,
    /// `Ax − b` at the current iterate.
    residual: Array1<f64>,
    prev: Option<Array1<f64>>,
    /// `A(x^k − x^{k−1})` from the last accepted step.
    prev_ad: Option<Array1<f64>>,
    /// `F(x^j) − F(x^{j−1})` for the last `M` accepted steps.
    deltas: VecDeque<f64>,
    records: Vec<IterRecord>,
    k: usize,
    started: Instant,
    stalled: bool,
}

impl<R: StepRule> Solver<R> {
    pub(crate) fn with_rule(rule: R, config: SolverConfig, x0: Array1<f64>) -> Result<Self> {
        config.validate()?;
        let f0 = rule.objective(&x0);
        if !f0.is_finite() {
            return domain("objective at the initial point is not finite");
        }
        let residual = rule.smooth().residual_unchecked(&x0);
        Ok(Self {
            rule,
            deltas: VecDeque::with_capacity(config.memory),
            config,
            x: x0,
            residual,
            prev: None,
            prev_ad: None,
            records: vec![IterRecord {
                k: 0,
                objective: f0,
                gamma: None,
                eta: None,
                step_norm: 0.0,
                time_s: 0.0,
            }],
            k: 0,
            started: Instant::now(),
            stalled: false,
        })
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn prev_x(&self) -> Option<&Array1<f64>> {
        self.prev.as_ref()
    }

    /// `v^k = ψ(|x^k|)` for DMA.
    pub fn v(&self) -> Option<&Array1<f64>> {
        self.rule.state_v()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn objective(&self) -> f64 {
        self.records
            .last()
            .expect("records are never empty")
            .objective
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn elapsed_s(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Resets the wall clock so that `T(0) = 0` refers to now.
    pub fn restart_clock(&mut self) {
        self.started = Instant::now();
    }

    /// `max_{[k−M]_+ ≤ i ≤ k} F(x^i) − F(x^k)`.
    fn reference_gap(&self) -> f64 {
        let mut acc = 0.0;
        let mut best = 0.0f64;
        for d in self.deltas.iter().rev() {
            acc -= d;
            best = best.max(acc);
        }
        best
    }

    fn bb_proposal(&self) -> f64 {
        match (&self.prev, &self.prev_ad) {
            (Some(prev), Some(ad)) => {
                let d = &self.x - prev;
                bb_ratio(d.dot(&d), self.rule.smooth().scale() * ad.dot(ad))
            }
            _ => 1.0,
        }
    }

    /// One outer iteration: BB proposal, `γ̃` backtracking, acceptance.
    pub fn outer_step(&mut self) -> Result<AcceptedStep> {
        let smooth = self.rule.smooth();
        let scale = smooth.scale();
        let mut grad = smooth.a().t().dot(&self.residual);
        grad *= scale;
        let gamma_proposed = self
            .bb_proposal()
            .clamp(self.config.gamma_min, self.config.gamma_max);
        let gap = self.reference_gap();
        let f_k = self.objective();

        let mut gamma = gamma_proposed;
        let mut accepted = None;
        for attempt in 1..=MAX_GAMMA_BACKTRACKS {
            let trial = self.rule.trial(&self.x, &grad, gamma)?;
            let d = &trial.u - &self.x;
            let dist2 = d.dot(&d);
            let ad = self.rule.smooth().a().dot(&d);
            let change = scale * ad.dot(&(&self.residual + &(&ad * 0.5)))
                + self.rule.penalty_change(&self.x, &trial.u);
            if change <= gap - 0.5 * self.config.c1 * dist2 {
                accepted = Some((trial, attempt, dist2.sqrt(), ad, change));
                break;
            }
            if attempt == MAX_GAMMA_BACKTRACKS && within_rounding(&trial.u, &self.x) {
                return Ok(self.null_step(trial, gamma_proposed, gamma, attempt, f_k, gap));
            }
            gamma *= self.config.tau;
        }
        let Some((trial, gamma_trials, step_norm, ad, change)) = accepted else {
            return Err(Error::SolverFault(format!(
                "nonmonotone line search failed after {MAX_GAMMA_BACKTRACKS} backtracks at k = {}",
                self.k
            )));
        };

        self.rule.accept(&trial);
        self.k += 1;
        let old = std::mem::replace(&mut self.x, trial.u);
        self.prev = Some(old);
        self.prev_ad = Some(ad);
        self.residual = self.rule.smooth().residual_unchecked(&self.x);
        let objective =
            0.5 * scale * self.residual.dot(&self.residual) + self.rule.penalty(&self.x);
        if self.config.memory > 0 {
            if self.deltas.len() == self.config.memory {
                self.deltas.pop_front();
            }
            self.deltas.push_back(change);
        }
        self.records.push(IterRecord {
            k: self.k,
            objective,
            gamma: Some(gamma),
            eta: trial.eta,
            step_norm,
            time_s: self.elapsed_s(),
        });
        Ok(AcceptedStep {
            k: self.k,
            objective,
            reference: f_k + gap,
            gamma_proposed,
            gamma,
            eta: trial.eta,
            gamma_trials,
            eta_trials: trial.eta_trials,
            step_norm,
        })
    }

    /// Keeps `x` when every backtrack failed and the last candidate differs from
    /// it only by rounding. The sufficient decrease test was then decided by
    /// rounding noise alone.
    fn null_step(
        &mut self,
        trial: Trial,
        gamma_proposed: f64,
        gamma: f64,
        gamma_trials: usize,
        f_k: f64,
        gap: f64,
    ) -> AcceptedStep {
        self.stalled = true;
        self.k += 1;
        self.prev = Some(self.x.clone());
        self.prev_ad = Some(Array1::zeros(self.residual.len()));
        if self.config.memory > 0 {
            if self.deltas.len() == self.config.memory {
                self.deltas.pop_front();
            }
            self.deltas.push_back(0.0);
        }
        self.records.push(IterRecord {
            k: self.k,
            objective: f_k,
            gamma: Some(gamma),
            eta: trial.eta,
            step_norm: 0.0,
            time_s: self.elapsed_s(),
        });
        AcceptedStep {
            k: self.k,
            objective: f_k,
            reference: f_k + gap,
            gamma_proposed,
            gamma,
            eta: trial.eta,
            gamma_trials,
            eta_trials: trial.eta_trials,
            step_norm: 0.0,
        }
    }

    /// Termination status after the latest iteration, if any.
    pub fn termination(&self) -> Option<Termination> {
        if self.k > 0 {
            let last = self.records.last().expect("records are never empty");
            let xnorm = self.x.dot(&self.x).sqrt();
            if last.step_norm / xnorm.max(1.0) < self.config.tol_step {
                return Some(Termination::StepTolerance);
            }
            if self.stalled {
                return Some(Termination::Stalled);
            }
            if let Some(limit) = self.config.max_time_s {
                if last.time_s >= limit {
                    return Some(Termination::MaxTime);
                }
            }
        }
        if self.k >= self.config.max_iters {
            return Some(Termination::MaxIters);
        }
        None
    }

    pub fn run(self) -> Result<RunResult> {
        self.run_with(|_| {})
    }

    /// Runs to termination, calling `observe` after every accepted iterate.
    pub fn run_with(mut self, mut observe: impl FnMut(&Self)) -> Result<RunResult> {
        let termination = loop {
            if let Some(t) = self.termination() {
                break t;
            }
            self.outer_step()?;
            observe(&self);
        };
        Ok(self.into_result(termination))
    }

    pub fn into_result(self, termination: Termination) -> RunResult {
        RunResult {
            v: self.rule.state_v().cloned(),
            x: self.x,
            records: self.records,
            termination,
        }
    }
}
