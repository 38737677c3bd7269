//! Seed derivation and binary sampling.
//!
//! All randomness flows from a single master seed. Substreams for
//! independent purposes (weight init, per-epoch shuffles, per-sample Gibbs
//! draws, per-cell suite jobs) are derived by hashing the master seed with a
//! list of integer tags, so results are reproducible regardless of execution
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche for cheap tag mixing.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a sequence of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &t in tags {
        state = splitmix64(state ^ t);
    }
    state
}

/// A deterministic generator for the substream identified by `tags`.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}

/// Source of Bernoulli draws. Implemented by every `rand::Rng`; tests may
/// substitute stubs with scripted outcomes.
pub trait BinarySampler {
    /// One Bernoulli(p) draw.
    fn draw(&mut self, p: f64) -> u8;
}

impl<R: Rng> BinarySampler for R {
    fn draw(&mut self, p: f64) -> u8 {
        // u in [0,1): p = 0 never fires, p = 1 always does.
        u8::from(self.random::<f64>() < p)
    }
}

/// Sampler with a scripted outcome sequence, for deterministic tests.
#[derive(Debug, Clone)]
pub struct ScriptedSampler {
    outcomes: Vec<u8>,
    pos: usize,
}

impl ScriptedSampler {
    pub fn new(outcomes: Vec<u8>) -> Self {
        Self { outcomes, pos: 0 }
    }
}

impl BinarySampler for ScriptedSampler {
    fn draw(&mut self, _p: f64) -> u8 {
        let v = self.outcomes[self.pos % self.outcomes.len()];
        self.pos += 1;
        v
    }
}
