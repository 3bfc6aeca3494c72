//! Deterministic per-trial seed derivation.
//!
//! Campaign trials each get their own RNG stream derived from one master
//! seed, so outcomes are independent of scheduling order and trial subsets
//! can be reproduced in isolation.

/// SplitMix64 finalizer: a bijective avalanche mix of a 64-bit word.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master_seed`.
///
/// Shared across algorithms: trial i of every algorithm sees the same stream,
/// which pairs their starting conditions in comparisons.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add((index + 1).wrapping_mul(0x9E3779B97F4A7C15)))
}
