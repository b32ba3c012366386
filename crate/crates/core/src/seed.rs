//! Deterministic 64-bit seed derivation.
//!
//! Child seeds are produced with the SplitMix64 finaliser so that every tree
//! (and every grid-search candidate) gets an independent stream that depends
//! only on the master seed and its own index, never on scheduling.

/// Name of the mixing function, recorded in model files.
pub const SEED_MIXER: &str = "splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15)";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for child stream `index` of `master`.
pub fn derive(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
