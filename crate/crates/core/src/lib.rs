//! On-device fact-check matching for end-to-end encrypted messaging.
//!
//! [`pdq`] fingerprints images, [`match_index`] searches fingerprints in
//! Hamming space, [`fingerprint_store`] builds and applies signed update
//! bundles, [`pipeline`] simulates the encrypted message flow with checks
//! at both ends, and [`analysis`] measures shares before and after
//! fact-checks.

pub mod analysis;
pub mod fingerprint_store;
pub mod match_index;
pub mod pdq;
pub mod pipeline;
pub mod synth;
pub mod timestamp;

pub use fingerprint_store::{DeviceFingerprintSet, FingerprintRecord, MacKey, UpdateBundle, Verdict};
pub use match_index::{BloomFilter, MatchResult, MihIndex};
pub use pdq::{HashBits, PdqHash, RasterImage};
