//! Scalar and vector proximal maps for the NPG baselines.
//!
//! All scalar maps are odd in `y`: they work on `|y|` and restore the sign.

use ndarray::Array1;

use crate::constraint::{ConstraintKind, ConstraintSet};
use crate::error::{check_dim, domain, Result};

/// Soft threshold `sign(y)·max(|y| − t, 0)`.
pub fn prox_l1(y: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let mag = y.abs() - t;
    if mag > 0.0 {
        mag.copysign(y)
    } else {
        0.0
    }
}

/// Global minimizer of `(1/2γ)(t − y)² + λ|t|^p` for `0 < p < 1`.
///
/// The nonzero candidate is the larger root of `t + γλp·t^{p−1} = |y|`, which
/// lies to the right of the minimizer `t* = (γλp(1−p))^{1/(2−p)}` of the
/// left-hand side. It is found by Newton's method safeguarded with bisection
/// and then compared against `t = 0`; an exact tie resolves to 0.
pub fn prox_lp(y: f64, gamma: f64, lambda: f64, p: f64) -> f64 {
    debug_assert!(gamma > 0.0 && lambda >= 0.0 && p > 0.0 && p < 1.0);
    let a = y.abs();
    if a == 0.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return y;
    }
    let k = gamma * lambda * p;
    let q = |t: f64| t + k * t.powf(p - 1.0);
    let t_star = (k * (1.0 - p)).powf(1.0 / (2.0 - p));
    if t_star >= a || q(t_star) > a {
        return 0.0;
    }

    let (mut lo, mut hi) = (t_star, a);
    let mut t = a;
    for _ in 0..200 {
        let r = q(t) - a;
        if r > 0.0 {
            hi = t;
        } else if r < 0.0 {
            lo = t;
        } else {
            break;
        }
        let dr = 1.0 + k * (p - 1.0) * t.powf(p - 2.0);
        let mut next = t - r / dr;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let done = (next - t).abs() <= 1e-15 * t.max(1e-300) || hi - lo <= 1e-15 * hi;
        t = next;
        if done {
            break;
        }
    }

    let h = |s: f64| (s - a) * (s - a) / (2.0 * gamma) + lambda * s.powf(p);
    if h(t) < h(0.0) {
        t.copysign(y)
    } else {
        0.0
    }
}

/// Global minimizer of `(1/2γ)(t − y)² + λ·log(1 + |t|/ε)`.
///
/// For `t > 0` stationarity reads `t² + (ε − |y|)t + (γλ − ε|y|) = 0`; the
/// nonnegative real roots and `t = 0` are compared and the best is returned,
/// with ties resolved to 0.
pub fn prox_log(y: f64, gamma: f64, lambda: f64, eps: f64) -> f64 {
    debug_assert!(gamma > 0.0 && lambda >= 0.0 && eps > 0.0);
    let a = y.abs();
    if a == 0.0 {
        return 0.0;
    }
    let h = |s: f64| (s - a) * (s - a) / (2.0 * gamma) + lambda * (s / eps).ln_1p();
    let mut best = 0.0;
    let mut best_val = h(0.0);

    // disc = (ε − a)² − 4(γλ − εa) = (ε + a)² − 4γλ
    let disc = (eps + a) * (eps + a) - 4.0 * gamma * lambda;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let bcoef = eps - a;
        let ccoef = gamma * lambda - eps * a;
        // Numerically stable pair of roots.
        let qq = -0.5 * (bcoef + sq.copysign(bcoef));
        let mut roots = [qq, if qq != 0.0 { ccoef / qq } else { 0.0 }];
        if qq == 0.0 {
            roots = [0.5 * (-bcoef + sq), 0.5 * (-bcoef - sq)];
        }
        for r in roots {
            if r > 0.0 && r.is_finite() {
                let val = h(r);
                if val < best_val {
                    best = r;
                    best_val = val;
                }
            }
        }
    }
    if best == 0.0 {
        0.0
    } else {
        best.copysign(y)
    }
}

/// Proximal map of `λ‖·‖₁ + δ_Ω(|·|)` with step `t = γλ`:
/// `sgn(y) ∘ P_Ω(|y| − t·e)`, with `sgn(0) = +1`.
pub fn prox_l1_isotone(y: &Array1<f64>, t: f64, cs: &ConstraintSet) -> Result<Array1<f64>> {
    check_dim(cs.dim(), y.len())?;
    if !(t >= 0.0) {
        return domain(format!("threshold must be nonnegative, got {t}"));
    }
    if matches!(cs.kind(), ConstraintKind::NonnegOrthant) {
        return domain("prox_l1_isotone needs an isotone or block-isotone constraint");
    }
    Ok(l1_isotone_unchecked(y, t, cs))
}

pub(crate) fn l1_isotone_unchecked(y: &Array1<f64>, t: f64, cs: &ConstraintSet) -> Array1<f64> {
    let mut w: Vec<f64> = y.iter().map(|yi| yi.abs() - t).collect();
    cs.project_in_place(&mut w);
    y.iter()
        .zip(w)
        .map(|(&yi, wi)| if yi >= 0.0 { wi } else { -wi })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    /// Grid search over `[0, |y|]` followed by golden-section refinement
    /// around the best grid point; the result is compared against `t = 0`.
    fn grid_oracle(y: f64, h: impl Fn(f64) -> f64) -> f64 {
        let a = y.abs();
        if a == 0.0 {
            return 0.0;
        }
        let n = 20_000;
        let step = a / n as f64;
        let (mut bi, mut bv) = (0usize, h(0.0));
        for i in 1..=n {
            let val = h(i as f64 * step);
            if val < bv {
                bi = i;
                bv = val;
            }
        }
        if bi == 0 {
            return 0.0;
        }
        let (mut lo, mut hi) = ((bi as f64 - 1.0) * step, ((bi as f64 + 1.0) * step).min(a));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if h(m1) < h(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let t = 0.5 * (lo + hi);
        if h(t) < h(0.0) {
            t.copysign(y)
        } else {
            0.0
        }
    }

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(3.0, 1.0), 2.0);
        assert_eq!(prox_l1(0.5, 1.0), 0.0);
        assert_eq!(prox_l1(-3.0, 1.0), -2.0);
    }

    #[test]
    fn lp_examples() {
        assert_eq!(prox_lp(0.0, 1.0, 1.0, 0.5), 0.0);
        let v = prox_lp(2.0, 1.0, 0.1, 0.5);
        let oracle = grid_oracle(2.0, |t| (t - 2.0f64).powi(2) / 2.0 + 0.1 * t.powf(0.5));
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-4);
        assert_abs_diff_eq!(v, 1.9643, epsilon = 1e-4);
        assert_eq!(prox_lp(0.1, 1.0, 10.0, 0.5), 0.0);
        assert_eq!(
            grid_oracle(0.1, |t| (t - 0.1f64).powi(2) / 2.0 + 10.0 * t.powf(0.5)),
            0.0
        );
    }

    #[test]
    fn log_examples() {
        assert_eq!(prox_log(0.0, 1.0, 0.1, 0.5), 0.0);
        let v = prox_log(2.0, 1.0, 0.1, 0.5);
        let oracle = grid_oracle(2.0, |t| {
            (t - 2.0f64).powi(2) / 2.0 + 0.1 * (1.0 + t / 0.5).ln()
        });
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-4);
        assert_abs_diff_eq!(v, 1.9593, epsilon = 1e-4);
        assert_eq!(prox_log(-2.0, 1.0, 0.1, 0.5), -v);
    }

    #[test]
    fn l1_isotone_examples() {
        let iso = ConstraintSet::isotone(3).unwrap();
        assert_eq!(
            prox_l1_isotone(&array![3.0, 1.0, 2.0], 0.0, &iso).unwrap(),
            array![3.0, 1.5, 1.5]
        );
        let sorted = array![4.0, 2.0, 1.0];
        assert_eq!(prox_l1_isotone(&sorted, 0.0, &iso).unwrap(), sorted);
        assert_eq!(
            prox_l1_isotone(&array![-3.0, -1.0, -2.0], 0.0, &iso).unwrap(),
            array![-3.0, -1.5, -1.5]
        );
        let orth = ConstraintSet::nonneg(3).unwrap();
        assert!(prox_l1_isotone(&sorted, 0.1, &orth).is_err());
    }

    #[test]
    fn lp_threshold_is_continuous_in_the_root() {
        // Just above the threshold the nonzero root is returned, below it 0.
        let (gamma, lambda, p) = (1.0, 1.0, 0.5);
        let mut prev_zero = true;
        let mut jumps = 0;
        for i in 0..2000 {
            let y = i as f64 * 0.002;
            let z = prox_lp(y, gamma, lambda, p) == 0.0;
            if prev_zero && !z {
                jumps += 1;
            }
            prev_zero = z;
        }
        assert_eq!(jumps, 1);
    }
}
