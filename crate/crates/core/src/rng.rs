//! Reproducible random streams.
//!
//! Every unit of work (replicate, method, bootstrap resample) draws from its
//! own ChaCha stream keyed by a path of integers under a master seed, so
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit child key from a parent key and a path of indices.
pub fn derive_key(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed ^ GOLDEN), |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN) ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

/// An independent stream for `(seed, path...)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = derive_key(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
