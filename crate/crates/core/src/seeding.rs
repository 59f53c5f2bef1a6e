//! Seed derivation so that independent random streams (scenario layout,
//! in-episode dynamics, conformal sampling, action noise) never share state.

/// SplitMix64 finaliser applied to `seed` mixed with a stream tag.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod streams {
    pub const SCENARIO: u64 = 1;
    pub const DYNAMICS: u64 = 2;
    pub const CONFORMAL: u64 = 3;
    pub const EPISODE: u64 = 4;
    pub const ACTION_NOISE: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
    pub const EVAL: u64 = 8;
}
