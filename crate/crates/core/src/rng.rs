//! Keyed, counter-based random streams.
//!
//! A stream is identified by `(seed, domain, index)`. The ChaCha key is derived from the
//! seed and a domain tag, and the index selects the ChaCha stream, so any stream can be
//! reconstructed independently of how many others were consumed before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Deterministic generator for stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Platform-independent 64-bit hash of an identifier.
pub fn stable_hash(id: &str) -> u64 {
    let digest = Sha256::digest(id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
