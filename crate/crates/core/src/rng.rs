//! Deterministic random streams.
//!
//! Every parallel task draws from its own ChaCha stream keyed by the run seed
//! and a task tag, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of tags into a new 64-bit seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Stream tags that keep the different consumers of one run seed apart.
pub(crate) mod tag {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const CV_SPLIT: u64 = 3;
    pub const WORLD: u64 = 4;
    pub const RESPONSES: u64 = 5;
    pub const SWEEP: u64 = 6;
    pub const BASELINE: u64 = 7;
}
