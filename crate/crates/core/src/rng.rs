//! Keyed random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose seed is a
//! pure function of a user seed and a key path such as `(day, replication)`.
//! Work can therefore be split across threads in any order and still produce
//! bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Returns an independent generator for `(seed, key...)`.
///
/// Distinct key paths give statistically independent streams; the same path
/// always gives the same stream.
pub fn stream_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for (depth, &k) in key.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(k.wrapping_add((depth as u64 + 1).wrapping_mul(GOLDEN))));
    }
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_exact_mut(8).enumerate() {
        h = splitmix64(h ^ i as u64);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
