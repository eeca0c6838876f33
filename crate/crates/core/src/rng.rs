//! Seed expansion into independent, order-free random substreams.
//!
//! A substream is addressed by `(seed, stream, index)`; the same address
//! always yields the same generator, so shots can run in any order or on
//! any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, stream, index))
}

/// Stream identifiers. Values are arbitrary but fixed.
pub mod streams {
    pub const DRIFT: u64 = 0x01;
    pub const RABI_DETECT: u64 = 0x10;
    pub const SWITCH_DETECT: u64 = 0x20;
    pub const TOMO_DETECT: u64 = 0x30;
    pub const BOOTSTRAP: u64 = 0x40;
    pub const EXPERIMENT: u64 = 0x100;
}
