//! Counter-based seed fanout.
//!
//! One master seed deterministically derives independent streams keyed by
//! (purpose tag, counters). Experiments are bitwise reproducible and trials
//! are independent: changing what one trial consumes never shifts another
//! trial's stream. Branch turns are addressed per depth, so the part of a
//! branch below any prefix is independent of the prefix.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 round; the usual avalanche mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a purpose tag, and counters.
pub fn derive_seed(master: u64, tag: &str, counters: &[u64]) -> u64 {
    let mut h = mix(master);
    for b in tag.as_bytes() {
        h = mix(h ^ u64::from(*b));
    }
    for c in counters {
        h = mix(h ^ *c);
    }
    h
}

/// Stream RNG for a derived seed.
pub fn stream(master: u64, tag: &str, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, counters))
}

/// A uniform value in `0..bound` addressed purely by key, with no stream
/// state. Used for per-depth branch turns and per-(trial, index) draws.
pub fn indexed_uniform(master: u64, tag: &str, counters: &[u64], bound: u64) -> u64 {
    assert!(bound > 0);
    // Rejection-free: bound is tiny (tree arities) so modulo bias over 2^64
    // is far below any tolerance used in the tests.
    derive_seed(master, tag, counters) % bound
}

/// Bernoulli draw addressed purely by key.
pub fn indexed_bernoulli(master: u64, tag: &str, counters: &[u64], p: f64) -> bool {
    let u = derive_seed(master, tag, counters) as f64 / u64::MAX as f64;
    u < p
}
