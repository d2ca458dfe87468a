//! Deterministic RNG streams keyed by a run seed plus context words such as
//! an epoch or timestamp index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, parts...)`.
pub fn stream(seed: u64, parts: &[u64]) -> Rng {
    let key = parts
        .iter()
        .fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Context tags that keep streams for different purposes apart.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const VALID: u64 = 3;
    pub const CLASSIFIER: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const SBM: u64 = 6;
    pub const SHUFFLE: u64 = 7;
}
