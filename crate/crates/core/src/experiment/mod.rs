//! Synthetic compressed sensing and time-lagged regression experiments.

pub mod cs;
pub mod lagged;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Array1<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Reorders each consecutive block of `block_len` entries so that magnitudes
/// are nonincreasing within the block. Signs are kept.
pub fn sort_blocks_by_magnitude(x: &mut Array1<f64>, block_len: usize) {
    assert!(block_len > 0 && x.len().is_multiple_of(block_len));
    let slice = x.as_slice_mut().expect("contiguous");
    for block in slice.chunks_mut(block_len) {
        block.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    }
}

/// Gaussian start whose magnitudes are nonincreasing per block, hence
/// feasible for the isotone and block-isotone cones.
pub fn sorted_gaussian_start<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    block_len: usize,
) -> Array1<f64> {
    let mut x = gaussian_vec(rng, n);
    sort_blocks_by_magnitude(&mut x, block_len);
    x
}

/// [`sorted_gaussian_start`] drawn from a ChaCha8 stream seeded with `seed`.
pub fn seeded_sorted_start(seed: u64, n: usize, block_len: usize) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted_gaussian_start(&mut rng, n, block_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sorted_start_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sorted_gaussian_start(&mut rng, 40, 40);
        assert!(ConstraintSet::isotone(40)
            .unwrap()
            .contains_abs(x.as_slice().unwrap()));
        let x = sorted_gaussian_start(&mut rng, 40, 8);
        assert!(ConstraintSet::block_isotone(40, 8)
            .unwrap()
            .contains_abs(x.as_slice().unwrap()));
    }

    #[test]
    fn same_seed_same_start() {
        let a = sorted_gaussian_start(&mut ChaCha8Rng::seed_from_u64(9), 16, 4);
        let b = sorted_gaussian_start(&mut ChaCha8Rng::seed_from_u64(9), 16, 4);
        assert_eq!(a, b);
    }
}
