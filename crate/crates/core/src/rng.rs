//! Seed handling. Every sampler takes an explicit seed; parallel work splits
//! the seed space deterministically so results do not depend on scheduling.

use rand_pcg::Pcg64;
use rand::SeedableRng;

/// splitmix64 finalizer, used to decorrelate derived seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for subtask `idx` of a run seeded with `seed`.
pub fn split_seed(seed: u64, idx: u64) -> u64 {
    mix(seed ^ mix(idx.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}
