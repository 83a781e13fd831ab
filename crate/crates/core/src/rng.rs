//! Seeded random streams.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng`, a counter-based
//! generator whose output is identical on every platform. Streams are never
//! shared between consumers: each one is derived from a master `u64` seed, a
//! static label and a list of integer coordinates (meta-epoch, client id, ...)
//! by hashing them with SHA-256 and using the 32-byte digest as the ChaCha key:
//!
//! ```text
//! key = SHA-256( seed_le64 || len_le64(label) || label || for each i: i_le64 )
//! ```
//!
//! so adding a consumer (another client, another algorithm) never perturbs
//! the draws of the existing ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn derive_stream(seed: u64, label: &str, coords: &[u64]) -> Stream {
    Stream::from_seed(derive_key(seed, label, coords))
}

pub fn derive_key(seed: u64, label: &str, coords: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    h.finalize().into()
}

/// Derives a child `u64` seed (first eight digest bytes, little endian).
pub fn derive_seed(seed: u64, label: &str, coords: &[u64]) -> u64 {
    let key = derive_key(seed, label, coords);
    u64::from_le_bytes(key[..8].try_into().unwrap())
}

/// Uniform integer in `[0, n)`. Sampling goes through `u64` so results do
/// not depend on the platform's pointer width.
#[inline]
pub fn below(rng: &mut Stream, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.random_range(0..n as u64) as usize
}
