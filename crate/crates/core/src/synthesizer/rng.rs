//! Per-group random streams.
//!
//! Every stream is seeded from SHA-256 over
//! `master_seed (u64 LE) || len(group_id) (u64 LE) || group_id || len(purpose) (u64 LE) || purpose`
//! and drives a ChaCha8 generator. A group's draws therefore depend only on
//! the master seed, its id and the purpose label, never on processing order.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master_seed: u64, group_id: &str, purpose: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((group_id.len() as u64).to_le_bytes());
    h.update(group_id.as_bytes());
    h.update((purpose.len() as u64).to_le_bytes());
    h.update(purpose.as_bytes());
    h.finalize().into()
}

/// The first eight seed bytes as a little-endian integer; recorded in audits.
pub fn seed_label(seed: &[u8; 32]) -> u64 {
    u64::from_le_bytes(seed[..8].try_into().expect("8 bytes"))
}

pub fn derive_rng(master_seed: u64, group_id: &str, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master_seed, group_id, purpose))
}

/// Uniform index in `0..n` by rejection sampling on 64-bit words.
pub fn uniform_index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    assert!(n > 0, "cannot draw from an empty range");
    let n = n as u64;
    let threshold = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return (x % n) as usize;
        }
    }
}

/// Index drawn proportionally to `weights` (all finite and non-negative,
/// positive sum).
pub fn weighted_index<R: RngCore + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut target = unit * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
