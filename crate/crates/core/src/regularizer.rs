//! Sparsity-inducing scalar functions `ψ` and their inverses `φ = ψ⁻¹`.
//!
//! Three families are supported: the identity `ψ(t) = t`, the power
//! `ψ(t) = t^p` with `0 < p ≤ 1/2`, and the logarithm `ψ(t) = log(1 + t/ε)`.
//! Each one is concave and increasing on `[0, ∞)` with `ψ(0) = 0`, and its
//! inverse `φ` is convex with a locally Lipschitz right derivative. The solver
//! works in the reparametrized coordinates `v = ψ(|x|)`.
//!
//! All scalar evaluations are pure; vector forms apply them componentwise.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A real number or `+∞`, kept as a tagged value so infinities never leak
/// into arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
}

impl ExtendedReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::PosInfinity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Linear,
    Lp { p: f64 },
    Log { eps: f64 },
}

/// A validated `ψ`/`φ` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct Regularizer {
    family: Family,
}

impl TryFrom<Family> for Regularizer {
    type Error = crate::Error;

    fn try_from(family: Family) -> Result<Self> {
        match family {
            Family::Linear => Ok(Self::linear()),
            Family::Lp { p } => Self::lp(p),
            Family::Log { eps } => Self::log(eps),
        }
    }
}

impl From<Regularizer> for Family {
    fn from(reg: Regularizer) -> Self {
        reg.family
    }
}

impl Regularizer {
    pub fn linear() -> Self {
        Self {
            family: Family::Linear,
        }
    }

    /// `ψ(t) = t^p`. Exponents above 1/2 are rejected: for them the right
    /// derivative of `t^{1/p}` is not locally Lipschitz at the origin.
    pub fn lp(p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 0.5) {
            return domain(format!(
                "lp exponent must lie in (0, 0.5], got {p}; for p > 0.5 the inverse \
                 t^(1/p) has a right derivative that is not locally Lipschitz at 0"
            ));
        }
        Ok(Self {
            family: Family::Lp { p },
        })
    }

    pub fn log(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return domain(format!("log regularizer requires eps > 0, got {eps}"));
        }
        Ok(Self {
            family: Family::Log { eps },
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.family, Family::Linear)
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        check_nonneg("psi", t)?;
        Ok(self.psi_unchecked(t))
    }

    pub fn phi(&self, v: f64) -> Result<f64> {
        check_nonneg("phi", v)?;
        Ok(self.phi_unchecked(v))
    }

    /// Right derivative `φ'_+(v)`.
    pub fn phi_right_deriv(&self, v: f64) -> Result<f64> {
        check_nonneg("phi_right_deriv", v)?;
        Ok(self.dphi_unchecked(v))
    }

    /// `ψ'(t)` for `t > 0`.
    pub fn psi_deriv(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("psi_deriv requires t > 0, got {t}"));
        }
        Ok(match self.family {
            Family::Linear => 1.0,
            Family::Lp { p } => p * t.powf(p - 1.0),
            Family::Log { eps } => 1.0 / (eps + t),
        })
    }

    /// `ψ'_+(0)`: 1 for the identity, `1/ε` for the logarithm, `+∞` for powers.
    pub fn psi_right_deriv_at_zero(&self) -> ExtendedReal {
        match self.family {
            Family::Linear => ExtendedReal::Finite(1.0),
            Family::Lp { .. } => ExtendedReal::PosInfinity,
            Family::Log { eps } => ExtendedReal::Finite(1.0 / eps),
        }
    }

    /// Supremum of `φ''` on `[0, a]`. `φ''` is nondecreasing for every family,
    /// so it is attained at `a`.
    pub fn phi_curvature_bound(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return domain(format!("curvature bound requires a > 0, got {a}"));
        }
        Ok(match self.family {
            Family::Linear => 0.0,
            Family::Lp { p } => {
                let r = 1.0 / p;
                r * (r - 1.0) * a.powf(r - 2.0)
            }
            Family::Log { eps } => eps * a.exp(),
        })
    }

    /// Constant `L` such that `g(s) ≤ g(t) + g'_+(t)(s − t) + (L/2)(s − t)²`
    /// for all `s, t ∈ [0, a]`, where `g(t) = (φ(t) − b)²/(2γ)` and `|b| ≤ b_abs`.
    ///
    /// `L = (c/γ)(sup|φ| + |b|) + (1/γ)(sup|φ'_+| + ac/2)²` with `c` the
    /// curvature bound of `φ` on `[0, a]`. Used for diagnostics only.
    pub fn majorization_constant(&self, a: f64, b_abs: f64, gamma: f64) -> Result<f64> {
        if !(a > 0.0) {
            return domain(format!("majorization_constant requires a > 0, got {a}"));
        }
        if !(gamma > 0.0) {
            return domain(format!(
                "majorization_constant requires gamma > 0, got {gamma}"
            ));
        }
        if !(b_abs >= 0.0) {
            return domain(format!(
                "majorization_constant requires b_abs >= 0, got {b_abs}"
            ));
        }
        let c = self.phi_curvature_bound(a)?;
        // φ and φ'_+ are nonnegative and nondecreasing, so both sups sit at a.
        let sup_phi = self.phi_unchecked(a);
        let sup_dphi = self.dphi_unchecked(a);
        let slope = sup_dphi + a * c / 2.0;
        Ok(c / gamma * (sup_phi + b_abs) + slope * slope / gamma)
    }

    /// `ψ(|x_i|)` componentwise.
    pub fn psi_abs(&self, x: &Array1<f64>) -> Array1<f64> {
        x.mapv(|xi| self.psi_unchecked(xi.abs()))
    }

    /// `φ(v_i)` componentwise. Entries of `v` must be nonnegative.
    pub fn phi_vec(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        if let Some(bad) = v.iter().find(|vi| !(**vi >= 0.0)) {
            return domain(format!("phi requires nonnegative entries, got {bad}"));
        }
        Ok(v.mapv(|vi| self.phi_unchecked(vi)))
    }

    /// `Σ ψ(|x_i|)`.
    pub fn penalty(&self, x: &Array1<f64>) -> f64 {
        x.iter().map(|xi| self.psi_unchecked(xi.abs())).sum()
    }

    #[inline]
    pub(crate) fn psi_unchecked(&self, t: f64) -> f64 {
        match self.family {
            Family::Linear => t,
            Family::Lp { p } => t.powf(p),
            Family::Log { eps } => (t / eps).ln_1p(),
        }
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, v: f64) -> f64 {
        match self.family {
            Family::Linear => v,
            Family::Lp { p } => v.powf(1.0 / p),
            Family::Log { eps } => eps * v.exp_m1(),
        }
    }

    #[inline]
    pub(crate) fn dphi_unchecked(&self, v: f64) -> f64 {
        match self.family {
            Family::Linear => 1.0,
            Family::Lp { p } => {
                let r = 1.0 / p;
                r * v.powf(r - 1.0)
            }
            Family::Log { eps } => eps * v.exp(),
        }
    }
}

fn check_nonneg(op: &str, t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!(
            "{op} requires a finite nonnegative argument, got {t}"
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<Regularizer> {
        vec![
            Regularizer::linear(),
            Regularizer::lp(0.5).unwrap(),
            Regularizer::lp(0.3).unwrap(),
            Regularizer::lp(0.1).unwrap(),
            Regularizer::log(0.5).unwrap(),
            Regularizer::log(0.01).unwrap(),
        ]
    }

    #[test]
    fn psi_examples() {
        let half = Regularizer::lp(0.5).unwrap();
        assert_eq!(half.psi(4.0).unwrap(), 2.0);
        for reg in families() {
            assert_eq!(reg.psi(0.0).unwrap(), 0.0);
        }
        let log = Regularizer::log(0.5).unwrap();
        assert_relative_eq!(log.psi(1.0).unwrap(), 3.0_f64.ln(), epsilon = 1e-15);
        assert!(log.psi(-1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        let half = Regularizer::lp(0.5).unwrap();
        assert_eq!(half.phi(2.0).unwrap(), 4.0);
        let log = Regularizer::log(0.5).unwrap();
        assert_relative_eq!(log.phi(3.0_f64.ln()).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(Regularizer::linear().phi(3.0).unwrap(), 3.0);
        assert!(Regularizer::linear().phi(-0.1).is_err());
    }

    #[test]
    fn phi_right_deriv_examples() {
        let half = Regularizer::lp(0.5).unwrap();
        assert_eq!(half.phi_right_deriv(2.0).unwrap(), 4.0);
        assert_eq!(half.phi_right_deriv(0.0).unwrap(), 0.0);
        let log = Regularizer::log(0.5).unwrap();
        assert_eq!(log.phi_right_deriv(0.0).unwrap(), 0.5);
        assert!(log.phi_right_deriv(-1.0).is_err());
    }

    #[test]
    fn psi_slope_at_zero() {
        assert_eq!(
            Regularizer::linear().psi_right_deriv_at_zero(),
            ExtendedReal::Finite(1.0)
        );
        assert_eq!(
            Regularizer::lp(0.3).unwrap().psi_right_deriv_at_zero(),
            ExtendedReal::PosInfinity
        );
        assert_eq!(
            Regularizer::log(0.5).unwrap().psi_right_deriv_at_zero(),
            ExtendedReal::Finite(2.0)
        );
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(Regularizer::lp(0.9).is_err());
        assert!(Regularizer::lp(0.0).is_err());
        assert!(Regularizer::lp(f64::NAN).is_err());
        assert!(Regularizer::log(0.0).is_err());
        assert!(Regularizer::log(-1.0).is_err());
        assert!(Regularizer::lp(0.5).is_ok());
    }

    /// Brute-force evaluation of the constant: maximize |φ|, |φ'_+| and φ''
    /// (by finite differences of φ) over a fine grid of [0, a].
    fn majorization_oracle(reg: &Regularizer, a: f64, b_abs: f64, gamma: f64) -> f64 {
        let n = 200_000;
        let h = 1e-5;
        let mut sup_phi: f64 = 0.0;
        let mut sup_dphi: f64 = 0.0;
        let mut sup_curv: f64 = 0.0;
        for i in 0..=n {
            let t = a * i as f64 / n as f64;
            sup_phi = sup_phi.max(reg.phi(t).unwrap().abs());
            let fwd = (reg.phi(t + h).unwrap() - reg.phi(t).unwrap()) / h;
            sup_dphi = sup_dphi.max(fwd.abs());
            if t >= h {
                let curv = (reg.phi(t + h).unwrap() - 2.0 * reg.phi(t).unwrap()
                    + reg.phi(t - h).unwrap())
                    / (h * h);
                sup_curv = sup_curv.max(curv);
            }
        }
        let slope = sup_dphi + a * sup_curv / 2.0;
        sup_curv / gamma * (sup_phi + b_abs) + slope * slope / gamma
    }

    #[test]
    fn majorization_constant_examples() {
        let l = Regularizer::linear()
            .majorization_constant(1.0, 0.0, 1.0)
            .unwrap();
        assert_eq!(l, 1.0);

        let half = Regularizer::lp(0.5).unwrap();
        let l = half.majorization_constant(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(l, 11.0, epsilon = 1e-12);
        // Grid oracle agrees with the closed form to within its own step error.
        let oracle = majorization_oracle(&half, 1.0, 0.0, 1.0);
        assert_relative_eq!(oracle, 11.0, max_relative = 1e-3);

        let log = Regularizer::log(0.5).unwrap();
        assert!(log.majorization_constant(0.0, 1.0, 1.0).is_err());
        assert!(log.majorization_constant(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn majorization_constant_matches_grid_oracle() {
        for reg in families() {
            for &(a, b, g) in &[(0.7, 0.3, 2.0), (2.0, 1.5, 0.5), (3.0, 0.0, 1.0)] {
                let l = reg.majorization_constant(a, b, g).unwrap();
                let oracle = majorization_oracle(&reg, a, b, g);
                assert_relative_eq!(l, oracle, max_relative = 1e-3);
            }
        }
    }

    #[test]
    fn round_trip_on_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for reg in families() {
            for _ in 0..1000 {
                let t: f64 = rng.random_range(0.0..100.0);
                let back = reg.phi(reg.psi(t).unwrap()).unwrap();
                assert!(
                    (back - t).abs() <= 1e-10 * t.max(1.0),
                    "{reg:?}: t = {t}, back = {back}"
                );
            }
        }
    }

    #[test]
    fn psi_strictly_increasing_on_grid() {
        for reg in families() {
            let mut prev = reg.psi(0.0).unwrap();
            for i in 1..=2000 {
                let cur = reg.psi(i as f64 * 0.05).unwrap();
                assert!(cur > prev);
                prev = cur;
            }
        }
    }

    #[test]
    fn right_derivative_matches_forward_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-8;
        for reg in families() {
            for _ in 0..200 {
                let v: f64 = rng.random_range(0.01..3.0);
                let fd = (reg.phi(v + h).unwrap() - reg.phi(v).unwrap()) / h;
                let d = reg.phi_right_deriv(v).unwrap();
                assert_relative_eq!(fd, d, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn descent_inequality_holds_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for reg in families() {
            for _ in 0..2000 {
                let a: f64 = rng.random_range(0.05..4.0);
                let b: f64 = rng.random_range(-5.0..5.0);
                let gamma: f64 = rng.random_range(0.05..5.0);
                let s: f64 = rng.random_range(0.0..a);
                let t: f64 = rng.random_range(0.0..a);
                let l = reg.majorization_constant(a, b.abs(), gamma).unwrap();
                let g = |u: f64| (reg.phi(u).unwrap() - b).powi(2) / (2.0 * gamma);
                let dg = (reg.phi(t).unwrap() - b) * reg.phi_right_deriv(t).unwrap() / gamma;
                let rhs = g(t) + dg * (s - t) + l / 2.0 * (s - t).powi(2);
                assert!(g(s) <= rhs + 1e-10, "{reg:?} s={s} t={t} a={a} b={b}");
            }
        }
    }

    proptest! {
        #[test]
        fn phi_is_convex(v1 in 0.0f64..5.0, gap in 0.0f64..5.0, theta in 0.0f64..1.0, idx in 0usize..6) {
            let reg = families()[idx];
            let v2 = v1 + gap;
            let mid = reg.phi(theta * v1 + (1.0 - theta) * v2).unwrap();
            let chord = theta * reg.phi(v1).unwrap() + (1.0 - theta) * reg.phi(v2).unwrap();
            prop_assert!(mid <= chord + 1e-12 * chord.abs().max(1.0));
        }
    }
}
