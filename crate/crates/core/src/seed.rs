//! Splittable seed derivation.
//!
//! Every scene, frame, or signature variant owns an independent random stream
//! derived by hashing the master seed together with the child's identity:
//!
//! ```text
//! child = first 8 LE bytes of SHA-256("irscene/v1" || label || 0x00 || tag || 0x00 || master || index)
//! ```
//!
//! This makes batches embarrassingly parallel (no shared RNG state) while
//! keeping every output reproducible from `(master_seed, index)` alone.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed for `label` stream number `index`.
pub fn child_seed(master: u64, label: &str, index: u64) -> u64 {
    child_seed_tagged(master, label, "", index)
}

/// Derive a child seed with an extra identity tag (e.g. a vehicle/config key).
pub fn child_seed_tagged(master: u64, label: &str, tag: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"irscene/v1");
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(tag.as_bytes());
    hasher.update([0u8]);
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Deterministic stream for a derived seed.
pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
