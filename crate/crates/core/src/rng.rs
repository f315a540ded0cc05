//! Deterministic, stage-separated random streams.
//!
//! Every stream is ChaCha20 keyed by `(seed, label)`: the first 8 key bytes
//! are the seed (little-endian), the next 8 are FNV-1a-64 of the label, the
//! rest are zero. Only raw `u64` outputs are consumed and all derived draws
//! (bounded integers, unit floats, shuffles) are defined here, so the streams
//! are reproducible from the description alone.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::hash::fnv1a64;

pub struct StageRng {
    inner: ChaCha20Rng,
}

impl StageRng {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a64(label.as_bytes()).to_le_bytes());
        StageRng {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n` (Lemire's widening multiply with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.below(n as u64) as usize
    }

    /// Uniform double in the open interval (0, 1).
    pub fn unit_open(&mut self) -> f64 {
        loop {
            let x = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if x > 0.0 {
                return x;
            }
        }
    }

    /// Standard Gumbel variate.
    pub fn gumbel(&mut self) -> f64 {
        -(-self.unit_open().ln()).ln()
    }

    /// Fisher-Yates, drawing from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Moves a uniform sample of `k` elements to the front, in draw order.
    pub fn partial_shuffle<T>(&mut self, items: &mut [T], k: usize) {
        let n = items.len();
        for i in 0..k.min(n) {
            let j = i + self.index(n - i);
            items.swap(i, j);
        }
    }
}
