//! Deterministic sub-stream derivation.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded by
//! [`derive_seed`]`(base_seed, tag, index)`. The derivation is:
//!
//! 1. `h = FNV-1a-64(tag bytes)`
//! 2. `x = splitmix64(base_seed ^ splitmix64(h))`
//! 3. `seed = splitmix64(x ^ splitmix64(index ^ 0x9E37_79B9_7F4A_7C15))`
//!
//! where `splitmix64` is the SplitMix64 output finalizer. The result depends
//! only on its inputs, so paths can be generated in any order or on any
//! number of threads and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for the centers of the RBF basis.
pub const TAG_CENTERS: &str = "centers";
/// Stream tag for the monitor payoff set.
pub const TAG_MONITOR: &str = "monitor";
/// Stream tag for the benchmark payoff set.
pub const TAG_BENCHMARK: &str = "benchmark";
/// Stream tag for training epochs; per-path streams hang off the epoch seed.
pub const TAG_TRAIN: &str = "train";
/// Stream tag for a path within a training epoch.
pub const TAG_PATH: &str = "path";

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base_seed: u64, tag: &str, index: u64) -> u64 {
    let x = splitmix64(base_seed ^ splitmix64(fnv1a64(tag.as_bytes())));
    splitmix64(x ^ splitmix64(index ^ 0x9E37_79B9_7F4A_7C15))
}

pub fn stream(base_seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    stream_from(derive_seed(base_seed, tag, index))
}

pub fn stream_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of the `path_index`-th training path of `epoch`.
pub fn training_path_seed(base_seed: u64, epoch: u64, path_index: u64) -> u64 {
    derive_seed(derive_seed(base_seed, TAG_TRAIN, epoch), TAG_PATH, path_index)
}
