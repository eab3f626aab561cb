//! Deterministic random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ChaCha8 stream keyed by a 64-bit seed.
///
/// Two instances built from the same seed produce the same sequence on every
/// platform, so any operation that takes a `SeededRng` is a pure function of
/// its inputs and the seed.
#[derive(Debug, Clone)]
pub struct SeededRng {
    master_seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            inner: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        rand::Rng::random::<f64>(self)
    }

    /// Bernoulli trial with success probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
