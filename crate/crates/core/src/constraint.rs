//! Constraint sets `Ω ⊆ R^n_+` and exact Euclidean projections onto them.
//!
//! Every supported regularizer maps `[0, ∞)` onto itself increasingly and
//! fixes 0, so it preserves both order and nonnegativity: `ψ(Ω) = Ω` for all
//! sets here, and projecting onto `ψ(Ω)` is projecting onto `Ω`.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, domain, Result};

/// Blocks are projected in parallel only beyond this dimension.
const PAR_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// `w ≥ 0`
    NonnegOrthant,
    /// `w_1 ≥ w_2 ≥ … ≥ w_n ≥ 0`
    IsotoneNonneg,
    /// Each consecutive block of `block_len` entries is nonincreasing and nonnegative.
    BlockIsotoneNonneg { block_len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    kind: ConstraintKind,
    dim: usize,
}

impl ConstraintSet {
    pub fn nonneg(dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::NonnegOrthant, dim)
    }

    pub fn isotone(dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::IsotoneNonneg, dim)
    }

    pub fn block_isotone(dim: usize, block_len: usize) -> Result<Self> {
        Self::new(ConstraintKind::BlockIsotoneNonneg { block_len }, dim)
    }

    pub fn new(kind: ConstraintKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return domain("constraint set dimension must be positive");
        }
        if let ConstraintKind::BlockIsotoneNonneg { block_len } = kind {
            if block_len == 0 || !dim.is_multiple_of(block_len) {
                return domain(format!(
                    "block length {block_len} must be positive and divide dimension {dim}"
                ));
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the independent monotone runs: `n` for the isotone cone,
    /// `K` for the block cone, 1 for the orthant.
    pub fn run_len(&self) -> usize {
        match self.kind {
            ConstraintKind::NonnegOrthant => 1,
            ConstraintKind::IsotoneNonneg => self.dim,
            ConstraintKind::BlockIsotoneNonneg { block_len } => block_len,
        }
    }

    /// Exact membership test, no tolerance.
    pub fn contains(&self, w: &[f64]) -> bool {
        if w.len() != self.dim || w.iter().any(|wi| !(wi.is_finite() && *wi >= 0.0)) {
            return false;
        }
        w.chunks(self.run_len())
            .all(|run| run.windows(2).all(|p| p[0] >= p[1]))
    }

    /// `|x| ∈ Ω`, exactly.
    pub fn contains_abs(&self, x: &[f64]) -> bool {
        if x.len() != self.dim || x.iter().any(|xi| !xi.is_finite()) {
            return false;
        }
        x.chunks(self.run_len())
            .all(|run| run.windows(2).all(|p| p[0].abs() >= p[1].abs()))
    }

    /// Euclidean projection onto `ψ(Ω) = Ω`.
    pub fn project(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        check_dim(self.dim, v.len())?;
        let mut out = v.to_vec();
        check_finite(&out)?;
        self.project_in_place(&mut out);
        Ok(Array1::from(out))
    }

    /// In-place projection. The caller guarantees the length and finiteness.
    pub(crate) fn project_in_place(&self, w: &mut [f64]) {
        debug_assert_eq!(w.len(), self.dim);
        match self.kind {
            ConstraintKind::NonnegOrthant => {
                for wi in w.iter_mut() {
                    *wi = clamp_nonneg(*wi);
                }
            }
            ConstraintKind::IsotoneNonneg => pava_nonincreasing_nonneg(w),
            ConstraintKind::BlockIsotoneNonneg { block_len } => {
                if w.len() >= PAR_THRESHOLD {
                    w.par_chunks_mut(block_len)
                        .for_each(pava_nonincreasing_nonneg);
                } else {
                    w.chunks_mut(block_len).for_each(pava_nonincreasing_nonneg);
                }
            }
        }
    }
}

/// Projection onto `{w : w_1 ≥ … ≥ w_n ≥ 0}`.
pub fn project_isotone_nonneg(y: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() {
        return domain("cannot project an empty vector");
    }
    check_finite(y)?;
    let mut w = y.to_vec();
    pava_nonincreasing_nonneg(&mut w);
    Ok(w)
}

/// Projects each consecutive block of length `block_len` onto the isotone cone.
pub fn project_block_isotone(y: &[f64], block_len: usize) -> Result<Vec<f64>> {
    if y.is_empty() {
        return domain("cannot project an empty vector");
    }
    let cs = ConstraintSet::block_isotone(y.len(), block_len)?;
    check_finite(y)?;
    let mut w = y.to_vec();
    cs.project_in_place(&mut w);
    Ok(w)
}

fn check_finite(y: &[f64]) -> Result<()> {
    match y.iter().find(|v| !v.is_finite()) {
        Some(bad) => domain(format!("projection input must be finite, got {bad}")),
        None => Ok(()),
    }
}

#[inline]
fn clamp_nonneg(v: f64) -> f64 {
    // Avoids emitting -0.0.
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Pool-adjacent-violators for the nonincreasing order, followed by clamping
/// the pooled values at zero.
///
/// Clamping after pooling is exact here: the zero bound only binds on a
/// trailing run of blocks, and those blocks have nonpositive means.
/// Output monotonicity is exact because every entry of a block is the same
/// stored quotient and the stack keeps those quotients nonincreasing.
fn pava_nonincreasing_nonneg(w: &mut [f64]) {
    let mut sums: Vec<f64> = Vec::with_capacity(w.len());
    let mut counts: Vec<usize> = Vec::with_capacity(w.len());
    let mut means: Vec<f64> = Vec::with_capacity(w.len());

    for &val in w.iter() {
        let mut sum = val;
        let mut count = 1usize;
        let mut mean = val;
        while let Some(&prev) = means.last() {
            if prev >= mean {
                break;
            }
            sum += sums.pop().unwrap();
            count += counts.pop().unwrap();
            means.pop();
            mean = sum / count as f64;
        }
        sums.push(sum);
        counts.push(count);
        means.push(mean);
    }

    let mut pos = 0;
    for (&mean, &count) in means.iter().zip(&counts) {
        let value = clamp_nonneg(mean);
        w[pos..pos + count].fill(value);
        pos += count;
    }
}
