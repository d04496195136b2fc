//! Seed derivation and RNG construction.
//!
//! Every random draw in the pipeline comes from a ChaCha8 generator seeded
//! from a 64-bit seed. Sub-seeds are derived from the master seed by hashing
//! `(master_seed, stage_name, index)` with SHA-256, so stages never share a
//! stream and adding a stage does not perturb the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((stage.len() as u64).to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream ids used by the signal simulator.
pub(crate) const STREAM_AMPLITUDE: u64 = 1;
pub(crate) const STREAM_NOISE: u64 = 2;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(42, "simulate", 0);
        assert_eq!(a, derive_seed(42, "simulate", 0));
        assert_ne!(a, derive_seed(42, "simulate", 1));
        assert_ne!(a, derive_seed(42, "noise", 0));
        assert_ne!(a, derive_seed(43, "simulate", 0));
        // "ab"+"c" vs "a"+"bc" style collisions are excluded by the length prefix
        assert_ne!(derive_seed(1, "ab", 0), derive_seed(1, "a", 0));
    }

    #[test]
    fn streams_are_independent() {
        let mut a = rng(7, STREAM_AMPLITUDE);
        let mut b = rng(7, STREAM_NOISE);
        let xa: Vec<u64> = (0..4).map(|_| a.random()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.random()).collect();
        assert_ne!(xa, xb);
    }
}
