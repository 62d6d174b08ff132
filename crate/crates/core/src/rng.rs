//! Keyed random streams.
//!
//! Every stream is a ChaCha20 generator whose key is a SHA-256 digest of
//! `(master seed, tag, index)`, so streams never depend on draw order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

fn digest(master: u64, tag: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn substream(master: u64, tag: &str, index: u64) -> StreamRng {
    ChaCha20Rng::from_seed(digest(master, tag, index))
}

/// A 64-bit seed derived from `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let d = digest(master, tag, index);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
