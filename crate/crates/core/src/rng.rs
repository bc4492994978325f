//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from [`SynthRng`], a
//! xoshiro256++ generator whose 256-bit state is expanded from a single
//! 64-bit seed with SplitMix64 (`SeedableRng::seed_from_u64`). Identical
//! seeds give bit-identical streams on every platform.
//!
//! Parallel or per-replication work never shares a generator. Each task
//! derives its own seed with [`mix64`]`(base_seed, task_index)`, so results do
//! not depend on thread count or scheduling order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SynthRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective avalanche mixer on 64-bit words.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the sub-seed for task `index` of a run seeded with `base_seed`.
///
/// `mix64(s, i) = splitmix64(splitmix64(s) + (i + 1) * 0x9e3779b97f4a7c15)`.
/// Pre-mixing the base seed keeps neighbouring base seeds from producing
/// overlapping sub-seed sequences.
#[inline]
pub fn mix64(base_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base_seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SynthRng {
    SynthRng::seed_from_u64(seed)
}

/// Generator for task `index` under `base_seed`.
pub fn task_rng(base_seed: u64, index: u64) -> SynthRng {
    rng_from_seed(mix64(base_seed, index))
}
