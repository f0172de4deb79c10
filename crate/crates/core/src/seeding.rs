//! Reproducible stream seeding. Replica r of a master seed gets an
//! independent counter-based generator, so parallel runs are identical to
//! sequential ones regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive an independent stream seed for replica `r` of `master`.
#[inline]
pub fn mix(master: u64, r: u64) -> u64 {
    splitmix64(master ^ splitmix64(r.wrapping_add(0x5851f42d4c957f2d)))
}

/// Counter-based generator for a (master, replica) pair.
pub fn stream_rng(master: u64, r: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(master, r))
}
