//! Seeding contract for reproducible, parallel-safe simulation.
//!
//! All randomness flows through ChaCha8, a counter-based generator, seeded
//! with 64-bit values. Independent streams are derived with [`child_seed`]:
//! the child seed is a SplitMix64 hash of the parent seed and the stream
//! index, so replication `r` of a run with seed `s` always sees the same
//! stream regardless of thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for stream `index` under `parent`:
/// `splitmix64(splitmix64(parent) ^ splitmix64(index + 1))`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(1)))
}

/// The crate's generator, deterministic per seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
