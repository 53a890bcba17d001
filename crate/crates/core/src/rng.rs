//! Seeded random streams.
//!
//! A run owns one ChaCha8 key derived from its seed. Stream 0 drives the
//! sequential parts of the algorithm (initialization, resampling, variation);
//! every `(step, index)` pair gets its own stream so per-particle work gives
//! identical results however it is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn main(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Dedicated stream for work item `index` of step `step` (`step ≥ 1`).
    pub fn substream(&self, step: usize, index: usize) -> ChaCha8Rng {
        debug_assert!((1..(1 << 32)).contains(&step) && index < (1 << 32));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((step as u64) << 32) | index as u64);
        rng
    }
}
