//! Deterministic seeded sampling.
//!
//! The generator and draw procedure are pinned so selections reproduce
//! byte-for-byte across platforms and releases:
//!
//! * PRNG: ChaCha8 seeded via `SeedableRng::seed_from_u64`.
//! * Index draws: rejection sampling on `next_u64` — a draw in `[0, bound)`
//!   retries while the raw value falls in the biased tail
//!   `2^64 - (2^64 mod bound) ..`, then reduces modulo `bound`.
//! * Subset sampling: partial Fisher-Yates over the input order; the first
//!   `count` slots of the shuffle are the sample, in draw order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in [0, bound) without modulo bias.
pub fn uniform_index(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    assert!(bound > 0, "bound must be positive");
    // 2^64 mod bound, computed without overflow.
    let tail = bound.wrapping_neg() % bound;
    loop {
        let x = rng.next_u64();
        if x <= u64::MAX - tail {
            return x % bound;
        }
    }
}

/// First `count` positions of a seeded Fisher-Yates shuffle of 0..n,
/// in draw order.
pub fn sample_indices(n: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::Budget(format!(
            "cannot sample {count} items from a population of {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed);
    for i in 0..count {
        let j = i + uniform_index(&mut rng, (n - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(count);
    Ok(indices)
}
