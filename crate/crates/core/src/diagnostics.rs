//! Optimality certificates for computed solutions.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::constraint::ConstraintKind;
use crate::error::{check_dim, domain, Error, Result};
use crate::problem::Problem;
use crate::regularizer::ExtendedReal;

/// Fixed-point residual of the ψ_opt-stationarity condition at one `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `‖v − P_{ψ(Ω)}(v − μ/η)‖` with `v = ψ(|x|)`.
    pub residual: f64,
    pub eta_used: f64,
    /// Sign vector `α ∈ {−1, 1}^n`.
    pub alpha: Vec<f64>,
    /// `μ_i = λ + α_i ∇_i f(x) φ'_+(v_i)`.
    pub mu: Vec<f64>,
    /// Per-coordinate first-order flags, present when `Ω` is the orthant.
    pub coordinate_checks: Option<Vec<CoordCheck>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordCheck {
    Pass,
    Fail,
    /// Zero coordinate with `ψ'_+(0) = ∞`: nothing to check.
    Vacuous,
}

impl CoordCheck {
    pub fn ok(self) -> bool {
        self != CoordCheck::Fail
    }
}

/// `α_i = sgn(x_i)` if `x_i ≠ 0`, else `−sgn(∇_i f)` if that is nonzero, else 1.
pub fn alpha_signs(x: &Array1<f64>, grad: &Array1<f64>) -> Array1<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            if xi != 0.0 {
                xi.signum()
            } else if gi != 0.0 {
                -gi.signum()
            } else {
                1.0
            }
        })
        .collect()
}

pub fn psi_opt_residual(pb: &Problem, x: &Array1<f64>, eta: f64) -> Result<StationarityReport> {
    check_dim(pb.dim(), x.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    if !pb.is_feasible(x) {
        return Err(Error::Infeasible(
            "stationarity residual needs |x| in the constraint set".into(),
        ));
    }
    let reg = pb.reg();
    let grad = pb.smooth().gradient_unchecked(x);
    let alpha = alpha_signs(x, &grad);
    let v = reg.psi_abs(x);
    let mu: Array1<f64> = v
        .iter()
        .zip(&alpha)
        .zip(&grad)
        .map(|((&vi, &ai), &gi)| pb.lambda() + ai * gi * reg.dphi_unchecked(vi))
        .collect();
    let mut w: Vec<f64> = v.iter().zip(&mu).map(|(vi, mi)| vi - mi / eta).collect();
    pb.constraint().project_in_place(&mut w);
    let residual = v
        .iter()
        .zip(&w)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let coordinate_checks = match pb.constraint().kind() {
        ConstraintKind::NonnegOrthant => Some(unconstrained_flags(pb, x, &grad, 1e-8)),
        _ => None,
    };
    Ok(StationarityReport {
        residual,
        eta_used: eta,
        alpha: alpha.to_vec(),
        mu: mu.to_vec(),
        coordinate_checks,
    })
}

/// First-order conditions for `Ω = R^n_+`: `|λψ'(|x_i|)sgn(x_i) + ∇_i f| ≤ tol`
/// on the support and `|∇_i f| ≤ λψ'_+(0) + tol` off it.
pub fn check_unconstrained_stationarity(
    pb: &Problem,
    x: &Array1<f64>,
    tol: f64,
) -> Result<Vec<CoordCheck>> {
    check_dim(pb.dim(), x.len())?;
    if !matches!(pb.constraint().kind(), ConstraintKind::NonnegOrthant) {
        return domain("coordinatewise stationarity check only applies without order constraints");
    }
    if !(tol > 0.0) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let grad = pb.smooth().gradient_unchecked(x);
    Ok(unconstrained_flags(pb, x, &grad, tol))
}

fn unconstrained_flags(
    pb: &Problem,
    x: &Array1<f64>,
    grad: &Array1<f64>,
    tol: f64,
) -> Vec<CoordCheck> {
    let reg = pb.reg();
    let lambda = pb.lambda();
    let slope0 = reg.psi_right_deriv_at_zero();
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            let pass = if xi != 0.0 {
                // ψ'(t) = 1/φ'(ψ(t)) for t > 0
                let dpsi = 1.0 / reg.dphi_unchecked(reg.psi_unchecked(xi.abs()));
                (lambda * dpsi * xi.signum() + gi).abs() <= tol
            } else {
                match slope0 {
                    ExtendedReal::PosInfinity => return CoordCheck::Vacuous,
                    ExtendedReal::Finite(s) => gi.abs() <= lambda * s + tol,
                }
            };
            if pass {
                CoordCheck::Pass
            } else {
                CoordCheck::Fail
            }
        })
        .collect()
}

/// Largest relative discrepancy between central differences of `f` and its
/// analytic gradient, `max_i |fd_i − g_i| / max(1, |g_i|)`.
pub fn finite_diff_gradient_check(pb: &Problem, x: &Array1<f64>, h: f64) -> Result<f64> {
    check_dim(pb.dim(), x.len())?;
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("finite-difference step must be positive, got {h}"));
    }
    let f = pb.smooth();
    let grad = f.gradient_unchecked(x);
    let mut xp = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f.value_unchecked(&xp);
        xp[i] = xi - h;
        let fm = f.value_unchecked(&xp);
        xp[i] = xi;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    Ok(worst)
}
