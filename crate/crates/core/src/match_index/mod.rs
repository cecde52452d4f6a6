//! Exact and near-duplicate lookup over 256-bit fingerprints.
//!
//! [`BloomFilter`] is the compact exact-membership structure; [`MihIndex`]
//! answers fixed-radius Hamming queries up to [`MAX_RADIUS`].

mod bloom;
mod mih;

pub use bloom::BloomFilter;
pub use mih::{MihIndex, CHUNKS, MAX_RADIUS};

use thiserror::Error;

use crate::pdq::HashBits;

/// Conventional PDQ match threshold and the largest radius the 32x8 chunking covers.
pub const DEFAULT_RADIUS: u32 = 31;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("duplicate entry id {0}")]
    DuplicateId(u64),
    #[error("radius {0} unsupported; multi-index search is complete only up to {MAX_RADIUS}")]
    UnsupportedRadius(u32),
    #[error("invalid bloom parameters: expected_n={expected_n}, target_fpr={target_fpr}")]
    BloomParameters { expected_n: u64, target_fpr: f64 },
    #[error("malformed {what}: {reason}")]
    Decode { what: &'static str, reason: String },
}

/// Number of differing bit positions.
pub fn hamming(a: &HashBits, b: &HashBits) -> u32 {
    a.distance(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchResult {
    // Field order gives the (distance, id) sort.
    pub distance: u32,
    pub id: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &HashBits, b: &HashBits) -> u32 {
        (0..256).filter(|&i| a.bit(i) != b.bit(i)).count() as u32
    }

    #[test]
    fn hamming_basics() {
        let h = HashBits::from_bytes([0x5a; 32]);
        assert_eq!(hamming(&h, &h), 0);
        assert_eq!(hamming(&h, &h.complement()), 256);
    }

    #[test]
    fn hamming_matches_bit_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = HashBits::from_bytes(rng.random());
            let b = HashBits::from_bytes(rng.random());
            assert_eq!(hamming(&a, &b), naive(&a, &b));
        }
    }

    #[test]
    fn hamming_is_a_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let [a, b, c] = [(); 3].map(|_| HashBits::from_bytes(rng.random()));
            assert_eq!(hamming(&a, &b), hamming(&b, &a));
            assert!(hamming(&a, &c) <= hamming(&a, &b) + hamming(&b, &c));
        }
    }
}
