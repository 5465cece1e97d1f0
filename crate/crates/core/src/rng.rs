//! Seeded random streams.
//!
//! All randomness in the crate comes from ChaCha8, a counter-based generator, so a
//! `(seed, stream)` pair pins the exact sequence regardless of which thread
//! consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a single seed, on stream 0.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for trial `trial` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    seed ^ trial
}

/// Generator for `seed` on an explicit ChaCha stream. Distinct streams of the same
/// seed never overlap.
pub fn seeded_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A 64-bit seed drawn from `stream` of `seed`, for APIs that take a plain seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    use rand::RngCore;
    seeded_stream(seed, stream).next_u64()
}
