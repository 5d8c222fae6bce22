//! Seed derivation and per-unit random streams.
//!
//! Every source of randomness in the crate flows from a single master seed.
//! Independent uses (subject draws, bootstrap resamples, EM restarts, ...)
//! derive their own seed via [`derive_seed`] with a distinct purpose tag, and
//! independent units within one use (subject `i`, resample `r`) get their own
//! ChaCha stream via [`substream`]. Subject `i` therefore sees the same draws
//! no matter how many other subjects are generated or on how many threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const PURPOSE_SUBJECT: u64 = 1;
pub const PURPOSE_ARMS: u64 = 2;
pub const PURPOSE_BOOTSTRAP: u64 = 3;
pub const PURPOSE_EM: u64 = 4;
pub const PURPOSE_IMPUTATION: u64 = 5;
pub const PURPOSE_SIMULATION: u64 = 6;
pub const PURPOSE_BENCHMARK: u64 = 7;

/// SplitMix64 finalizer; a fixed bijective mixer on u64.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive an independent seed for one purpose from the master seed.
pub fn derive_seed(master: u64, purpose: u64) -> u64 {
    splitmix64(master ^ splitmix64(purpose))
}

/// RNG for unit `index` within the stream family identified by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
