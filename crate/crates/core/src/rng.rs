//! Deterministic seeding. Every random stream in the crate is a ChaCha8
//! generator seeded from a base seed and a path of stream tags.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a sequence of tags.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(seed: u64, tags: &[u64]) -> Rng {
    rng(derive(seed, tags))
}

/// Stream tags.
pub mod tag {
    pub const LEARNER: u64 = 1;
    pub const PROVIDER: u64 = 2;
    pub const CENTRAL: u64 = 3;
    pub const DATA: u64 = 10;
    pub const TEST_DATA: u64 = 11;
    pub const PARTITION: u64 = 12;
    pub const INIT: u64 = 13;
    pub const TRAIN: u64 = 20;
    pub const EVAL: u64 = 21;
    pub const NOISE: u64 = 22;
    pub const ENVS: u64 = 30;
    pub const TEST_I: u64 = 31;
    pub const TEST_II: u64 = 32;
}
