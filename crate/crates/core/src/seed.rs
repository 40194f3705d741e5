//! Deterministic seed derivation.
//!
//! Every stochastic component draws from its own ChaCha stream whose seed is a
//! stable hash of the run context (config hash, dataset, seed, method, ...).
//! Execution order therefore cannot change results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a, 64 bit. Stable across platforms and Rust versions, unlike
/// `std::hash::DefaultHasher`.
pub fn stable_hash(parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for part in parts {
        for b in part.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(PRIME);
        }
        // separator so ["ab","c"] != ["a","bc"]
        h ^= 0x1f;
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// RNG stream for a named context under a numeric run seed.
pub fn rng_for(seed: u64, context: &[&str]) -> ChaCha12Rng {
    let mut h = stable_hash(context);
    h ^= seed.rotate_left(17);
    ChaCha12Rng::seed_from_u64(h)
}
