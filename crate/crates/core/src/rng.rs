//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by a 64-bit seed, so results are stable across platforms
//! and worker counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a seed with a sub-key (band index, sub-stage id, ...).
pub fn substream(seed: u64, key: u64) -> u64 {
    mix64(seed ^ mix64(key.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Stage seed = mix(master, record index, stage id). Depends only on these
/// three values, so enabling or disabling one stage never shifts another.
pub fn derive_seed(master: u64, record_index: u64, stage_id: u64) -> u64 {
    substream(substream(mix64(master), record_index), stage_id)
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
