//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by
//! `(seed, domain, index)`, so replication `i` sees the same numbers no
//! matter how many worker threads run or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub(crate) const DOMAIN_NULL_ENSEMBLE: u64 = 1;
pub(crate) const DOMAIN_TRUTH: u64 = 2;
pub(crate) const DOMAIN_NOISE: u64 = 3;
pub(crate) const DOMAIN_FACTOR_LOADINGS: u64 = 4;
pub(crate) const DOMAIN_BLOCK_SIZES: u64 = 5;
pub(crate) const DOMAIN_STAGE_ONE: u64 = 6;
pub(crate) const DOMAIN_STAGE_TWO: u64 = 7;
pub(crate) const DOMAIN_STRUCTURE: u64 = 9;
pub(crate) const DOMAIN_CALIBRATION: u64 = 10;

/// Stream `index` of the generator for `(seed, domain)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Derive a child seed, used where a whole sub-computation needs its own seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(domain)).wrapping_add(index))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
