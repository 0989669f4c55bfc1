//! The composite objective `F(x) = f(x) + λ Σ ψ(|x_i|) + δ_Ω(|x|)` with a
//! least-squares smooth part.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constraint::ConstraintSet;
use crate::error::{check_dim, domain, Result};
use crate::regularizer::{ExtendedReal, Regularizer};

/// `f(x) = scale · ½‖Ax − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Array1<f64>,
    scale: f64,
}

impl LeastSquares {
    pub fn new(a: Array2<f64>, b: Array1<f64>, scale: f64) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        if !(scale > 0.0 && scale.is_finite()) {
            return domain(format!("least-squares scale must be positive, got {scale}"));
        }
        if a.ncols() == 0 || a.nrows() == 0 {
            return domain("design matrix must be nonempty");
        }
        Ok(Self { a, b, scale })
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of unknowns.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn residual(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.residual_unchecked(x))
    }

    pub fn value(&self, x: &Array1<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.value_unchecked(x))
    }

    /// `scale · Aᵀ(Ax − b)`.
    pub fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.gradient_unchecked(x))
    }

    /// `scale · ‖Ad‖²`, the curvature of `f` along `d`.
    pub fn curvature(&self, d: &Array1<f64>) -> f64 {
        let ad = self.a.dot(d);
        self.scale * ad.dot(&ad)
    }

    /// `scale · σ_max(A)²` by power iteration on `AᵀA`, up to `max_iters`
    /// iterations or until the relative change drops below `1e-12`.
    pub fn lipschitz_estimate_with(&self, max_iters: usize) -> f64 {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.dot(&v).sqrt();
        v /= norm;
        let mut est = 0.0;
        for _ in 0..max_iters {
            let w = self.a.t().dot(&self.a.dot(&v));
            let wn = w.dot(&w).sqrt();
            if wn == 0.0 {
                return 0.0;
            }
            let prev = est;
            est = wn;
            v = w / wn;
            if (est - prev).abs() <= 1e-12 * est {
                break;
            }
        }
        self.scale * est
    }

    pub fn lipschitz_estimate(&self) -> f64 {
        self.lipschitz_estimate_with(1000)
    }

    pub(crate) fn residual_unchecked(&self, x: &Array1<f64>) -> Array1<f64> {
        self.a.dot(x) - &self.b
    }

    pub(crate) fn value_unchecked(&self, x: &Array1<f64>) -> f64 {
        let r = self.residual_unchecked(x);
        0.5 * self.scale * r.dot(&r)
    }

    pub(crate) fn gradient_unchecked(&self, x: &Array1<f64>) -> Array1<f64> {
        let r = self.residual_unchecked(x);
        let mut g = self.a.t().dot(&r);
        g *= self.scale;
        g
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    smooth: LeastSquares,
    reg: Regularizer,
    lambda: f64,
    constraint: ConstraintSet,
}

impl Problem {
    pub fn new(
        smooth: LeastSquares,
        reg: Regularizer,
        lambda: f64,
        constraint: ConstraintSet,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive, got {lambda}"));
        }
        check_dim(smooth.dim(), constraint.dim())?;
        Ok(Self {
            smooth,
            reg,
            lambda,
            constraint,
        })
    }

    pub fn smooth(&self) -> &LeastSquares {
        &self.smooth
    }

    pub fn reg(&self) -> &Regularizer {
        &self.reg
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn grad_smooth(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.smooth.gradient(x)
    }

    pub fn is_feasible(&self, x: &Array1<f64>) -> bool {
        match x.as_slice() {
            Some(s) => self.constraint.contains_abs(s),
            None => self.constraint.contains_abs(&x.to_vec()),
        }
    }

    /// `F(x)`, or `+∞` when `|x| ∉ Ω` (membership is tested exactly).
    pub fn full_objective(&self, x: &Array1<f64>) -> Result<ExtendedReal> {
        check_dim(self.dim(), x.len())?;
        if !self.is_feasible(x) {
            return Ok(ExtendedReal::PosInfinity);
        }
        Ok(ExtendedReal::Finite(self.objective_unchecked(x)))
    }

    pub fn lipschitz_estimate(&self) -> f64 {
        self.smooth.lipschitz_estimate()
    }

    /// `F(x)` for a point already known to be feasible.
    pub(crate) fn objective_unchecked(&self, x: &Array1<f64>) -> f64 {
        self.smooth.value_unchecked(x) + self.lambda * self.reg.penalty(x)
    }
}
