//! Seed derivation. Every random stream in a run is a ChaCha8 generator keyed
//! by the run seed plus a tag, so streams stay independent and reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct constants keep sub-streams from colliding.
pub mod stream {
    pub const INIT: u64 = 0x01;
    pub const LATTICE: u64 = 0x02;
    pub const REACTIVATE: u64 = 0x03;
    pub const SHUFFLE: u64 = 0x04;
    pub const NOISE: u64 = 0x05;
    pub const BLOBS: u64 = 0x06;
}

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a single seed.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(base: u64, parts: &[u64]) -> ChaCha8Rng {
    rng(derive(base, parts))
}
