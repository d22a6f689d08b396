//! Named random sub-streams derived from a single user seed.
//!
//! Every consumer of randomness (initialization, shuffling, negative
//! sampling, splitting, synthetic generation) draws from its own stream, so
//! changing e.g. the number of epochs never perturbs a data split.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives the seed of stream `name`, instance `index`, from `seed`.
pub fn sub_seed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a(name)).wrapping_add(index))
}

pub fn stream(seed: u64, name: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(sub_seed(seed, name, index))
}
