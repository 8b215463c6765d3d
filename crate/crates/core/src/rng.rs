//! Deterministic random substreams.
//!
//! Every random quantity in the simulator is drawn from a generator keyed by
//! `(seed, a, b)`, where `a` and `b` identify what is being generated (an edge
//! and a pixel, a noise polarity, ...). Results therefore do not depend on
//! evaluation order or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SubRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and two labels.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let h = mix64(seed ^ mix64(a ^ 0x5EED_0000_0000_0001));
    mix64(h ^ mix64(b ^ 0x5EED_0000_0000_0002))
}

pub fn substream(seed: u64, a: u64, b: u64) -> SubRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, a, b))
}
