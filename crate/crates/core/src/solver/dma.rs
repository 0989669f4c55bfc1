//! Doubly majorized algorithm.
//!
//! For a trial stepsize `γ̃` the smooth part is majorized as in a proximal
//! gradient step, which leaves the subproblem
//!
//! ```text
//! min_{v ∈ ψ(Ω)}  G(v) = λ⟨e, v⟩ + Σ_i (φ(v_i) − y_i)² / (2γ̃),   y = |x − γ̃∇f(x)|
//! ```
//!
//! in the coordinates `v = ψ(|x|)`. One projected-gradient step with an `η̃`
//! backtracking search (doubling `η̃` until `G` does not increase) replaces an
//! exact solve, and the signs of `x − γ̃∇f(x)` are restored afterwards.

use ndarray::Array1;

use super::{EtaRule, RunResult, Solver, SolverConfig, StepRule, Trial};
use crate::constraint::ConstraintSet;
use crate::error::{check_dim, domain, Error, Result};
use crate::problem::{LeastSquares, Problem};
use crate::regularizer::Regularizer;

/// Cap on `η̃` increases per inner search.
pub const MAX_ETA_TRIALS: usize = 1000;

pub type DmaSolver<'a> = Solver<DmaRule<'a>>;

/// Right derivative of `g(v) = (φ(v) − y)² / (2γ)`, i.e. `(φ(v) − y)·φ'_+(v)/γ`.
pub fn g_right_deriv(v: f64, y: f64, gamma: f64, reg: &Regularizer) -> Result<f64> {
    if !(v >= 0.0 && y >= 0.0 && gamma > 0.0) {
        return domain(format!(
            "g_right_deriv requires v >= 0, y >= 0, gamma > 0; got ({v}, {y}, {gamma})"
        ));
    }
    Ok(g_deriv(reg, v, y, gamma))
}

#[inline]
fn g_deriv(reg: &Regularizer, v: f64, y: f64, gamma: f64) -> f64 {
    (reg.phi_unchecked(v) - y) * reg.dphi_unchecked(v) / gamma
}

/// Minimizer over `ψ(Ω)` of `(η/2)‖v − v_k‖² + ⟨c, v − v_k⟩`, which is the
/// projection of `v_k − c/η`.
pub fn linearized_projection(
    v_k: &Array1<f64>,
    coeffs: &Array1<f64>,
    eta: f64,
    cs: &ConstraintSet,
) -> Result<Array1<f64>> {
    check_dim(cs.dim(), v_k.len())?;
    check_dim(cs.dim(), coeffs.len())?;
    if !(eta > 0.0) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    let mut out = vec![0.0; v_k.len()];
    shifted_projection(v_k, coeffs, eta, cs, &mut out);
    Ok(Array1::from(out))
}

fn shifted_projection(
    v_k: &Array1<f64>,
    coeffs: &Array1<f64>,
    eta: f64,
    cs: &ConstraintSet,
    out: &mut [f64],
) {
    for ((o, v), c) in out.iter_mut().zip(v_k).zip(coeffs) {
        *o = v - c / eta;
    }
    cs.project_in_place(out);
}

/// Outcome of the inner `η̃` search.
#[derive(Debug, Clone)]
pub struct EtaSearch {
    pub v: Array1<f64>,
    pub eta: f64,
    pub trials: usize,
    /// `G(ṽ) − G(v^k)`, nonpositive on acceptance.
    pub surrogate_change: f64,
}

/// Runs the `η̃` backtracking for a fixed `γ̃` from the iterate `x` with
/// `v = ψ(|x|)` and gradient `grad`.
pub fn eta_line_search(
    pb: &Problem,
    x: &Array1<f64>,
    v: &Array1<f64>,
    grad: &Array1<f64>,
    gamma: f64,
    config: &SolverConfig,
) -> Result<EtaSearch> {
    check_dim(pb.dim(), x.len())?;
    check_dim(pb.dim(), v.len())?;
    check_dim(pb.dim(), grad.len())?;
    if !(gamma > 0.0) {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    let y: Array1<f64> = (x - &(grad * gamma)).mapv(f64::abs);
    eta_search_inner(pb, v, &y, gamma, config)
}

fn eta_search_inner(
    pb: &Problem,
    v: &Array1<f64>,
    y: &Array1<f64>,
    gamma: f64,
    config: &SolverConfig,
) -> Result<EtaSearch> {
    let reg = pb.reg();
    let lambda = pb.lambda();
    let coeffs: Array1<f64> = v
        .iter()
        .zip(y)
        .map(|(&vi, &yi)| lambda + g_deriv(reg, vi, yi, gamma))
        .collect();
    // G(w) − G(v) summed coordinatewise, so that nearly equal surrogate
    // values are compared without cancellation between two large totals.
    let change = |w: &[f64]| -> f64 {
        w.iter()
            .zip(v)
            .zip(y)
            .map(|((&wi, &vi), &yi)| {
                if wi == vi {
                    return 0.0;
                }
                let (pw, pv) = (reg.phi_unchecked(wi), reg.phi_unchecked(vi));
                lambda * (wi - vi) + (pw - pv) * (pw + pv - 2.0 * yi) / (2.0 * gamma)
            })
            .sum()
    };

    let mut eta = match config.eta_rule {
        EtaRule::Fixed => config.eta_init,
        EtaRule::InverseGamma => 1.0 / gamma,
    };
    let mut cand = vec![0.0; v.len()];
    for trials in 1..=MAX_ETA_TRIALS {
        shifted_projection(v, &coeffs, eta, pb.constraint(), &mut cand);
        let delta = change(&cand);
        if delta <= 0.0 {
            return Ok(EtaSearch {
                v: Array1::from(cand),
                eta,
                trials,
                surrogate_change: delta,
            });
        }
        eta /= config.tau;
    }
    Err(Error::SolverFault(format!(
        "eta search did not reach surrogate descent within {MAX_ETA_TRIALS} increases"
    )))
}

/// Step rule holding `v^k = ψ(|x^k|)`.
pub struct DmaRule<'a> {
    pb: &'a Problem,
    config: SolverConfig,
    v: Array1<f64>,
}

impl StepRule for DmaRule<'_> {
    fn smooth(&self) -> &LeastSquares {
        self.pb.smooth()
    }

    fn penalty(&self, x: &Array1<f64>) -> f64 {
        self.pb.lambda() * self.pb.reg().penalty(x)
    }

    fn penalty_change(&self, x: &Array1<f64>, u: &Array1<f64>) -> f64 {
        let reg = self.pb.reg();
        let sum: f64 = x
            .iter()
            .zip(u)
            .map(|(&xi, &ui)| reg.psi_unchecked(ui.abs()) - reg.psi_unchecked(xi.abs()))
            .sum();
        self.pb.lambda() * sum
    }

    fn trial(&mut self, x: &Array1<f64>, grad: &Array1<f64>, gamma: f64) -> Result<Trial> {
        let z = x - &(grad * gamma);
        let y = z.mapv(f64::abs);
        let search = eta_search_inner(self.pb, &self.v, &y, gamma, &self.config)?;
        let reg = self.pb.reg();
        // sgn(0) = +1
        let u: Array1<f64> = z
            .iter()
            .zip(&search.v)
            .map(|(&zi, &vi)| {
                let mag = reg.phi_unchecked(vi);
                if zi >= 0.0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        Ok(Trial {
            u,
            v: Some(search.v),
            eta: Some(search.eta),
            eta_trials: search.trials,
        })
    }

    fn accept(&mut self, trial: &Trial) {
        if let Some(v) = &trial.v {
            self.v.assign(v);
        }
    }

    fn state_v(&self) -> Option<&Array1<f64>> {
        Some(&self.v)
    }
}

impl<'a> DmaSolver<'a> {
    /// Starts DMA from `x0`, which must satisfy `|x0| ∈ Ω`.
    pub fn new(pb: &'a Problem, config: SolverConfig, x0: Array1<f64>) -> Result<Self> {
        check_dim(pb.dim(), x0.len())?;
        if !pb.is_feasible(&x0) {
            return Err(Error::Infeasible(
                "initial point must satisfy |x0| in the constraint set".into(),
            ));
        }
        let v = pb.reg().psi_abs(&x0);
        let rule = DmaRule {
            pb,
            config: config.clone(),
            v,
        };
        Solver::with_rule(rule, config, x0)
    }
}

pub fn dma_solve(pb: &Problem, config: &SolverConfig, x0: Array1<f64>) -> Result<RunResult> {
    DmaSolver::new(pb, config.clone(), x0)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Termination;
    use ndarray::{array, Array2};

    fn lsq(a: Array2<f64>, b: Array1<f64>) -> LeastSquares {
        LeastSquares::new(a, b, 1.0).unwrap()
    }

    #[test]
    fn g_right_deriv_examples() {
        let lin = Regularizer::linear();
        assert_eq!(g_right_deriv(1.0, 0.5, 1.0, &lin).unwrap(), 0.5);
        let half = Regularizer::lp(0.5).unwrap();
        assert_eq!(g_right_deriv(1.0, 0.5, 1.0, &half).unwrap(), 1.0);
        assert_eq!(g_right_deriv(0.0, 3.7, 0.2, &half).unwrap(), 0.0);
        assert!(g_right_deriv(-1.0, 0.5, 1.0, &lin).is_err());
        assert!(g_right_deriv(1.0, 0.5, 0.0, &lin).is_err());
    }

    #[test]
    fn linearized_projection_examples() {
        let orth = ConstraintSet::nonneg(2).unwrap();
        let out = linearized_projection(&array![1.0, 1.0], &array![2.0, 0.5], 1.0, &orth).unwrap();
        assert_eq!(out, array![0.0, 0.5]);

        let iso = ConstraintSet::isotone(3).unwrap();
        let vk = array![2.0, 1.0, 1.0];
        assert_eq!(
            linearized_projection(&vk, &Array1::zeros(3), 0.37, &iso).unwrap(),
            vk
        );
        let out = linearized_projection(&vk, &array![-1.0, 0.0, 1.0], 1.0, &iso).unwrap();
        assert_eq!(out, array![3.0, 1.0, 0.0]);
        assert!(linearized_projection(&vk, &array![1.0], 1.0, &iso).is_err());
    }

    #[test]
    fn zero_data_terminates_at_origin() {
        let pb = Problem::new(
            lsq(Array2::eye(3), Array1::zeros(3)),
            Regularizer::lp(0.5).unwrap(),
            0.1,
            ConstraintSet::isotone(3).unwrap(),
        )
        .unwrap();
        let res = dma_solve(&pb, &SolverConfig::default(), Array1::zeros(3)).unwrap();
        assert_eq!(res.termination, Termination::StepTolerance);
        assert_eq!(res.iterations(), 1);
        assert_eq!(res.x, Array1::<f64>::zeros(3));
        assert_eq!(res.final_objective(), 0.0);
    }

    #[test]
    fn rejects_infeasible_start() {
        let pb = Problem::new(
            lsq(Array2::eye(2), Array1::zeros(2)),
            Regularizer::linear(),
            0.1,
            ConstraintSet::isotone(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            DmaSolver::new(&pb, SolverConfig::default(), array![1.0, -2.0]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn linear_with_large_eta_needs_one_trial() {
        // With ψ(t) = t and η̃ ≥ 1/γ̃ the first trial always decreases G.
        let a = array![[1.0, 0.3, -0.2], [0.1, 0.9, 0.4], [-0.5, 0.2, 1.1]];
        let pb = Problem::new(
            lsq(a, array![1.0, -2.0, 0.5]),
            Regularizer::linear(),
            0.05,
            ConstraintSet::isotone(3).unwrap(),
        )
        .unwrap();
        let x = array![1.0, -0.5, 0.25];
        let v = pb.reg().psi_abs(&x);
        let grad = pb.grad_smooth(&x).unwrap();
        for gamma in [0.5, 1.0, 3.0] {
            let cfg = SolverConfig {
                eta_init: 1.0 / gamma,
                eta_max: 1.0 / gamma,
                eta_min: 1e-8,
                ..SolverConfig::default()
            };
            let s = eta_line_search(&pb, &x, &v, &grad, gamma, &cfg).unwrap();
            assert_eq!(s.trials, 1);
        }
    }

    #[test]
    fn stationary_point_is_a_fixed_point() {
        // b = 0 and x = 0: zero gradient, every coefficient equals λ.
        let pb = Problem::new(
            lsq(array![[2.0, 1.0], [0.0, 1.0]], Array1::zeros(2)),
            Regularizer::log(0.5).unwrap(),
            0.3,
            ConstraintSet::nonneg(2).unwrap(),
        )
        .unwrap();
        let mut solver = DmaSolver::new(&pb, SolverConfig::default(), Array1::zeros(2)).unwrap();
        solver.outer_step().unwrap();
        assert_eq!(solver.x(), &Array1::<f64>::zeros(2));
    }
}
