//! Seed derivation for independent, schedule-free random streams.
//!
//! Every randomized step takes an explicit base seed. Work items that run
//! concurrently (tournament groups, CV trials, per-feature fits) derive
//! their own stream from `(base, tag)` so results never depend on which
//! worker picked up which item.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and an integer tag.
pub fn derive(base: u64, tag: u64) -> u64 {
    mix(mix(base.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Derives a child seed from a base seed and a string tag (e.g. a feature label).
pub fn derive_str(base: u64, tag: &str) -> u64 {
    // FNV-1a: stable across platforms and compiler versions.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive(base, h)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
