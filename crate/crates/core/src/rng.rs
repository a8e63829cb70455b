//! Seed and stream derivation.
//!
//! Every random draw in a run comes from a ChaCha8 generator whose seed and
//! stream are a pure function of the run seed, the block key and the chain
//! index:
//!
//! * block seed = `mix(run_seed, fnv1a(block_key))`
//! * chain `c` parameter/matching stream = stream `2c` of the block seed
//! * chain `c` visit-order stream = stream `2c + 1` of the block seed
//!
//! Scheduling (worker count, order of block completion) therefore never
//! changes a draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for an independent unit of work (a block) identified by `label`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    mix64(seed ^ mix64(fnv1a(label.as_bytes())))
}

/// The two generators used by chain `chain`: (parameter and matching draws, visit order).
pub fn chain_streams(seed: u64, chain: u32) -> (ChainRng, ChainRng) {
    let mut draws = ChaCha8Rng::seed_from_u64(seed);
    draws.set_stream(2 * u64::from(chain));
    let mut order = ChaCha8Rng::seed_from_u64(seed);
    order.set_stream(2 * u64::from(chain) + 1);
    (draws, order)
}
