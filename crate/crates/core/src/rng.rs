//! Deterministic random streams.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] built with
//! `SeedableRng::seed_from_u64`. Child seeds are derived from a master seed
//! and a list of string labels by hashing with SHA-256:
//!
//! ```text
//! digest = SHA256( master.to_le_bytes()
//!                  || for each label: (label.len() as u64).to_le_bytes() || label )
//! seed   = u64::from_le_bytes(digest[0..8])
//! ```
//!
//! Both ChaCha8 and the `seed_from_u64` expansion are platform independent,
//! so a run reproduces bit for bit on any machine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update((label.len() as u64).to_le_bytes());
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
