//! Stateless seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value obtained by folding a tuple of integers through an avalanche mixer.
//! Streams therefore depend only on their tuple, never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role tags keep streams of different subsystems apart.
pub mod role {
    pub const REPLICATION: u64 = 0x5245_504c;
    pub const COORDINATE: u64 = 0x434f_4f52;
    pub const ALIASED_TAIL: u64 = 0x5441_494c;
    pub const OU_PATH: u64 = 0x4f55_5054;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `base` one word at a time.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| {
            mix64(acc.wrapping_mul(0xff51_afd7_ed55_8ccd).wrapping_add(mix64(p)))
        })
}

pub fn stream(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}
