//! Seed derivation.
//!
//! Every random stream in a run is derived from the run seed plus a label, so
//! results never depend on thread scheduling or on how many streams were drawn
//! before.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used everywhere. ChaCha output is fixed by its algorithm, so
/// streams are identical across platforms and crate versions.
pub type Rng = ChaCha8Rng;

/// Hashes `(base, tag, index)` into a new 64-bit seed.
pub fn derive(base: u64, tag: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
