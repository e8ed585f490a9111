//! Deterministic random streams.
//!
//! Every random decision in the toolkit is drawn from a [`ChaCha8Rng`]
//! derived from a master seed plus a path of integer tags. Distinct tag
//! paths give statistically independent streams, and the derivation is
//! stable across platforms and runs, which is what makes whole pipelines
//! byte-reproducible.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Stable bit-mixing used for seed derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Combine a seed with one tag into a new seed.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0xa0761d6478bd642f)))
}

/// Derive a child seed from a master seed and a tag path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &t| mix(acc, t))
}

/// A seeded generator for the stream identified by `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream tags. Using named constants keeps the fanout layout in one place.
pub mod tags {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const PARTITION: u64 = 6;
    pub const SUBSAMPLE: u64 = 7;
    pub const TRAIN: u64 = 8;
}
