//! Seed derivation.
//!
//! Every random object is drawn from its own ChaCha8 stream. The stream seed
//! is derived from the 64-bit master seed and a path of stream ids by folding
//! each id into the state with one SplitMix64 step:
//!
//! ```text
//! state = master
//! for id in path: state = splitmix64(state ^ splitmix64(id + 0x9E3779B97F4A7C15))
//! ```
//!
//! so `(seed, cell, trial, object)` addresses a stream independently of the
//! order in which trials are executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream ids.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |state, &id| {
        splitmix64(state ^ splitmix64(id.wrapping_add(GOLDEN)))
    })
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Well-known stream ids so the same object kind always hits the same stream.
pub mod ids {
    pub const MATRIX_A: u64 = 1;
    pub const MATRIX_B: u64 = 2;
    pub const SIGNAL: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const PROBE: u64 = 5;
    pub const INSTANCE: u64 = 6;
}
