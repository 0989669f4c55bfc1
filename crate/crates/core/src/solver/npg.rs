//! Nonmonotone proximal gradient baselines.
//!
//! `x^{k+1} = prox_{γ̃P}(x^k − γ̃∇f(x^k))` with the same BB proposal and
//! window acceptance rule as DMA.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{RunResult, Solver, SolverConfig, StepRule, Trial};
use crate::constraint::{ConstraintKind, ConstraintSet};
use crate::error::{check_dim, domain, Error, Result};
use crate::problem::{LeastSquares, Problem};
use crate::prox::{l1_isotone_unchecked, prox_l1, prox_log, prox_lp};
use crate::regularizer::Family;

pub type NpgSolver<'a> = Solver<NpgRule<'a>>;

/// Nonsmooth term `P` handled through its proximal map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProxSpec {
    /// `λ‖z‖₁`
    L1 { lambda: f64 },
    /// `λΣ|z_i|^p`, `0 < p < 1`
    Lp { lambda: f64, p: f64 },
    /// `λΣ log(1 + |z_i|/ε)`
    Log { lambda: f64, eps: f64 },
    /// `λ‖z‖₁ + δ_Ω(|z|)`
    L1Isotone {
        lambda: f64,
        constraint: ConstraintSet,
    },
}

impl ProxSpec {
    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return domain(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            ));
        }
        match *self {
            ProxSpec::Lp { p, .. } if !(p > 0.0 && p < 1.0) => {
                domain(format!("lp exponent must lie in (0, 1), got {p}"))
            }
            ProxSpec::Log { eps, .. } if !(eps > 0.0 && eps.is_finite()) => {
                domain(format!("log parameter eps must be positive, got {eps}"))
            }
            ProxSpec::L1Isotone { ref constraint, .. }
                if matches!(constraint.kind(), ConstraintKind::NonnegOrthant) =>
            {
                domain("L1 with order constraint needs an isotone or block-isotone set")
            }
            _ => Ok(()),
        }
    }

    /// The NPG counterpart of a DMA problem: the same penalty on the same set.
    pub fn from_problem(pb: &Problem) -> Result<Self> {
        let lambda = pb.lambda();
        let orthant = matches!(pb.constraint().kind(), ConstraintKind::NonnegOrthant);
        match (pb.reg().family(), orthant) {
            (Family::Linear, true) => Ok(ProxSpec::L1 { lambda }),
            (Family::Lp { p }, true) => Ok(ProxSpec::Lp { lambda, p }),
            (Family::Log { eps }, true) => Ok(ProxSpec::Log { lambda, eps }),
            (Family::Linear, false) => Ok(ProxSpec::L1Isotone {
                lambda,
                constraint: *pb.constraint(),
            }),
            (family, false) => domain(format!(
                "no proximal baseline for {family:?} combined with an order constraint"
            )),
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            ProxSpec::L1 { lambda }
            | ProxSpec::Lp { lambda, .. }
            | ProxSpec::Log { lambda, .. }
            | ProxSpec::L1Isotone { lambda, .. } => lambda,
        }
    }

    /// Scalar penalty `P_i(t)` without the factor `λ`.
    fn unit_penalty(&self, t: f64) -> f64 {
        match *self {
            ProxSpec::L1 { .. } | ProxSpec::L1Isotone { .. } => t.abs(),
            ProxSpec::Lp { p, .. } => t.abs().powf(p),
            ProxSpec::Log { eps, .. } => (t.abs() / eps).ln_1p(),
        }
    }

    /// `P(z)`, ignoring the indicator of the order constraint.
    pub fn penalty(&self, z: &Array1<f64>) -> f64 {
        self.lambda() * z.iter().map(|&t| self.unit_penalty(t)).sum::<f64>()
    }

    /// `P(u) − P(z)` summed coordinatewise.
    pub fn penalty_change(&self, z: &Array1<f64>, u: &Array1<f64>) -> f64 {
        let sum: f64 = z
            .iter()
            .zip(u)
            .map(|(&zi, &ui)| self.unit_penalty(ui) - self.unit_penalty(zi))
            .sum();
        self.lambda() * sum
    }

    pub fn is_feasible(&self, z: &Array1<f64>) -> bool {
        match self {
            ProxSpec::L1Isotone { constraint, .. } => {
                z.len() == constraint.dim()
                    && z.as_slice().map_or_else(
                        || constraint.contains_abs(&z.to_vec()),
                        |s| constraint.contains_abs(s),
                    )
            }
            _ => true,
        }
    }

    /// `prox_{γP}(z)`.
    pub fn prox(&self, z: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
        self.validate()?;
        if !(gamma > 0.0) {
            return domain(format!("gamma must be positive, got {gamma}"));
        }
        if let ProxSpec::L1Isotone { constraint, .. } = self {
            check_dim(constraint.dim(), z.len())?;
        }
        Ok(self.prox_unchecked(z, gamma))
    }

    fn prox_unchecked(&self, z: &Array1<f64>, gamma: f64) -> Array1<f64> {
        match *self {
            ProxSpec::L1 { lambda } => z.mapv(|y| prox_l1(y, gamma * lambda)),
            ProxSpec::Lp { lambda, p } => z.mapv(|y| prox_lp(y, gamma, lambda, p)),
            ProxSpec::Log { lambda, eps } => z.mapv(|y| prox_log(y, gamma, lambda, eps)),
            ProxSpec::L1Isotone {
                lambda,
                ref constraint,
            } => l1_isotone_unchecked(z, gamma * lambda, constraint),
        }
    }
}

pub struct NpgRule<'a> {
    smooth: &'a LeastSquares,
    spec: ProxSpec,
}

impl StepRule for NpgRule<'_> {
    fn smooth(&self) -> &LeastSquares {
        self.smooth
    }

    fn penalty(&self, x: &Array1<f64>) -> f64 {
        self.spec.penalty(x)
    }

    fn penalty_change(&self, x: &Array1<f64>, u: &Array1<f64>) -> f64 {
        self.spec.penalty_change(x, u)
    }

    fn trial(&mut self, x: &Array1<f64>, grad: &Array1<f64>, gamma: f64) -> Result<Trial> {
        let z = x - &(grad * gamma);
        let u = self.spec.prox_unchecked(&z, gamma);
        Ok(Trial {
            u,
            v: None,
            eta: None,
            eta_trials: 0,
        })
    }
}

impl<'a> NpgSolver<'a> {
    pub fn new(
        smooth: &'a LeastSquares,
        spec: ProxSpec,
        config: SolverConfig,
        x0: Array1<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        check_dim(smooth.dim(), x0.len())?;
        if let ProxSpec::L1Isotone { constraint, .. } = &spec {
            check_dim(smooth.dim(), constraint.dim())?;
        }
        if !spec.is_feasible(&x0) {
            return Err(Error::Infeasible(
                "initial point must satisfy |x0| in the constraint set".into(),
            ));
        }
        Solver::with_rule(NpgRule { smooth, spec }, config, x0)
    }
}

pub fn npg_solve(
    smooth: &LeastSquares,
    spec: &ProxSpec,
    config: &SolverConfig,
    x0: Array1<f64>,
) -> Result<RunResult> {
    NpgSolver::new(smooth, spec.clone(), config.clone(), x0)?.run()
}
