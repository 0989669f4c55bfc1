//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use ordsparse::experiment::cs::{gen_cs_instance, CsInstance};
use ordsparse::{ConstraintSet, LeastSquares, Problem, Regularizer};

/// Projection onto `{w : w_1 ≥ … ≥ w_n ≥ 0}` by exhaustive search.
///
/// The projection is piecewise constant on contiguous runs, with each run at
/// its clamped mean. Every contiguous partition is tried, infeasible
/// candidates are dropped and the nearest feasible one is returned.
pub fn brute_force_isotone_projection(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    assert!((1..=16).contains(&n));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut cand = vec![0.0; n];
        let mut start = 0;
        for end in 1..=n {
            let cut = end == n || mask & (1 << (end - 1)) != 0;
            if cut {
                let mean = y[start..end].iter().sum::<f64>() / (end - start) as f64;
                cand[start..end].fill(mean.max(0.0));
                start = end;
            }
        }
        if cand.windows(2).any(|w| w[0] < w[1]) {
            continue;
        }
        let d: f64 = cand.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, cand));
        }
    }
    best.expect("the zero vector is always a candidate").1
}

/// Global minimizer over `t` with `sign(t) ∈ {0, sign(y)}` of a separable
/// scalar objective `h(|t|)`: a uniform grid on `[0, |y|]`, golden-section
/// refinement around the best grid point, then comparison against `t = 0`.
pub fn prox_grid_oracle(y: f64, h: impl Fn(f64) -> f64) -> f64 {
    let a = y.abs();
    if a == 0.0 {
        return 0.0;
    }
    let n = 20_000;
    let step = a / n as f64;
    let (mut bi, mut bv) = (0usize, h(0.0));
    for i in 1..=n {
        let v = h(i as f64 * step);
        if v < bv {
            bi = i;
            bv = v;
        }
    }
    if bi == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = ((bi - 1) as f64 * step, ((bi + 1) as f64 * step).min(a));
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

pub fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Desk-scale compressed sensing instance.
pub fn desk_instance(seed: u64) -> CsInstance {
    gen_cs_instance(256, 54, 18, 0.1, seed).unwrap()
}

pub fn cs_problem(inst: &CsInstance, reg: Regularizer, lambda: f64, cs: ConstraintSet) -> Problem {
    Problem::new(inst.least_squares(), reg, lambda, cs).unwrap()
}

/// Least squares from explicit data with unit scale.
pub fn lsq(a: Array2<f64>, b: Array1<f64>) -> LeastSquares {
    LeastSquares::new(a, b, 1.0).unwrap()
}
