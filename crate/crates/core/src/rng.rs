//! Seed-derived random substreams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, index)`, so results do not depend on evaluation order or
//! on how work is split between threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent families of streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Emission = 1,
    Pair = 2,
    ScheduleLeft = 3,
    ScheduleRight = 4,
    Synthesis = 5,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substreams {
    key: [u8; 32],
}

impl Substreams {
    pub fn new(seed: u64, domain: Domain) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        root.set_stream(domain as u64);
        let mut key = [0u8; 32];
        root.fill_bytes(&mut key);
        Substreams { key }
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }

    /// Uniform index in `0..n` for counter `index`, without building a
    /// reusable stream.
    pub fn index_below(&self, index: u64, n: usize) -> usize {
        let x = self.stream(index).next_u64();
        ((u128::from(x) * n as u128) >> 64) as usize
    }

    pub fn uniform(&self, index: u64) -> f64 {
        self.stream(index).random()
    }
}
