//! Per-trial random streams.
//!
//! A master seed keys a ChaCha8 generator and the trial index selects its
//! 64-bit stream, so trial `i` always sees the same draws whichever worker
//! runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Index drawn with probability proportional to `weights` (nonnegative, not all zero).
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return i;
            }
            target -= w;
            last_positive = i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = trial_rng(7, 3);
        let mut r2 = trial_rng(7, 3);
        let mut r3 = trial_rng(7, 4);
        let x1: u64 = r1.gen();
        assert_eq!(x1, r2.gen::<u64>());
        assert_ne!(x1, r3.gen::<u64>());
    }

    #[test]
    fn weighted_skips_zero_weights() {
        let mut rng = trial_rng(1, 0);
        for _ in 0..1000 {
            let i = sample_weighted(&[0.0, 1.0, 0.0, 3.0, 0.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
