//! Seeded random test vectors.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{norm, C64};

pub type TestRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Gaussian vector (not normalized).
pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        })
        .collect()
}

/// Uniformly distributed unit vector in `C^n`.
pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    loop {
        let v = gaussian_vector(rng, n);
        let r = norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|z| z / r).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_vector() {
        let a = unit_vector(&mut seeded(3), 5);
        let b = unit_vector(&mut seeded(3), 5);
        assert_eq!(a, b);
        assert!((norm(&a) - 1.0).abs() < 1e-14);
    }
}
