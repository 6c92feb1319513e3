//! Seed plumbing. Every random stream in the crate is a splitmix64 generator
//! seeded explicitly, so runs are reproducible from a single base seed.

use rand::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seeds a fresh stream.
pub fn stream(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Derives the seed of the `index`-th child stream of `base`.
///
/// Children are independent of evaluation order, which is what lets parallel
/// and serial match execution produce identical results.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng =
        SplitMix64::seed_from_u64(base ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    rng.next_u64()
}
