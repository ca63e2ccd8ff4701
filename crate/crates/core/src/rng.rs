//! Seed splitting.
//!
//! Every consumer of randomness (stream construction, STM initialization,
//! labeled-set draws, test-set draws, k-means restarts) gets its own
//! generator, derived from a master seed and a path of integers:
//!
//! ```text
//! h0 = mix(master)
//! h_{i+1} = mix(h_i ^ mix(path[i] + GOLDEN))
//! ```
//!
//! where `mix` is the SplitMix64 finalizer. Changing one consumer's sample
//! size therefore never shifts another consumer's random sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere. ChaCha output is specified bit-for-bit,
/// so seeded runs agree across platforms.
pub type StamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Well-known first path elements.
pub mod component {
    pub const STREAM: u64 = 1;
    pub const INIT: u64 = 2;
    pub const LABELED: u64 = 3;
    pub const TEST: u64 = 4;
    pub const KMEANS: u64 = 5;
    pub const BASELINE_KMEANS: u64 = 6;
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `master` and a path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(master), |h, &p| mix(h ^ mix(p.wrapping_add(GOLDEN))))
}

/// A generator for `master` / `path`.
pub fn rng_for(master: u64, path: &[u64]) -> StamRng {
    StamRng::seed_from_u64(derive_seed(master, path))
}

/// A generator seeded directly.
pub fn seeded(seed: u64) -> StamRng {
    StamRng::seed_from_u64(seed)
}
