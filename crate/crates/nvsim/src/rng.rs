//! Deterministic random-stream derivation.
//!
//! Every stochastic stage of a run derives its own generator from the master
//! seed and a stream index. Streams are decorrelated by two rounds of
//! SplitMix64 before seeding ChaCha8, so results are independent of how work
//! is split across threads: trajectory `i` always consumes stream `i`.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed and a stream index into an independent stream seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(stream.wrapping_mul(0xa076_1d64_78bd_642f)))
}

/// Deterministic generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, stream))
}
