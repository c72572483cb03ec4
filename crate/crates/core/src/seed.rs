//! Deterministic seed derivation.
//!
//! Child seeds are the first eight bytes of a SHA-256 digest over a domain tag and the
//! parent words, so derived streams are pure functions of their inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive(tag: &str, words: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    for w in words {
        h.update(w.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Hashes an arbitrary string into a 64-bit word for use in [`derive`].
pub fn hash_str(s: &str) -> u64 {
    derive(s, &[])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
