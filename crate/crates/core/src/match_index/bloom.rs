use std::f64::consts::LN_2;

use super::IndexError;
use crate::pdq::HashBits;

const MAGIC: &[u8; 4] = b"BLM1";
const MAX_HASHES: u32 = 16;
const DEFAULT_SEEDS: [u64; 2] = [0x243f_6a88_85a3_08d3, 0x1319_8a2e_0370_7344];

/// Bloom filter over 256-bit fingerprints.
///
/// The k probe positions come from double hashing,
/// `index_i = (h1 + i * h2) mod m`, where `h1` and `h2` are seeded 64-bit
/// mixes of the fingerprint words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    m: u64,
    k: u32,
    n: u64,
    seeds: [u64; 2],
    bits: Vec<u8>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn keyed_mix(seed: u64, words: &[u64; 4]) -> u64 {
    words.iter().fold(seed, |acc, &w| splitmix(acc ^ w))
}

impl BloomFilter {
    /// Sizes a filter: `m = ceil(-n ln p / ln^2 2)`, `k = clamp(round(m/n ln 2), 1, 16)`.
    pub fn create(expected_n: u64, target_fpr: f64) -> Result<Self, IndexError> {
        Self::with_seeds(expected_n, target_fpr, DEFAULT_SEEDS)
    }

    pub fn with_seeds(expected_n: u64, target_fpr: f64, seeds: [u64; 2]) -> Result<Self, IndexError> {
        if expected_n == 0 || !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(IndexError::BloomParameters { expected_n, target_fpr });
        }
        let n = expected_n as f64;
        let m = (-n * target_fpr.ln() / (LN_2 * LN_2)).ceil() as u64;
        let k = ((m as f64 / n) * LN_2).round().clamp(1.0, f64::from(MAX_HASHES)) as u32;
        Ok(BloomFilter {
            m,
            k,
            n: 0,
            seeds,
            bits: vec![0; m.div_ceil(8) as usize],
        })
    }

    pub fn bit_len(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `(1 - e^(-kn/m))^k` for the current element count.
    pub fn expected_fpr(&self) -> f64 {
        let (k, n, m) = (f64::from(self.k), self.n as f64, self.m as f64);
        (1.0 - (-k * n / m).exp()).powf(k)
    }

    fn positions(&self, h: &HashBits) -> impl Iterator<Item = u64> + '_ {
        let words = h.words();
        let h1 = keyed_mix(self.seeds[0], &words);
        let h2 = keyed_mix(self.seeds[1], &words) | 1;
        (0..u64::from(self.k)).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % self.m)
    }

    pub fn insert(&mut self, h: &HashBits) {
        let positions: Vec<u64> = self.positions(h).collect();
        for p in positions {
            self.bits[(p / 8) as usize] |= 1 << (p % 8);
        }
        self.n += 1;
    }

    /// `false` means definitely absent.
    pub fn contains(&self, h: &HashBits) -> bool {
        self.positions(h)
            .all(|p| self.bits[(p / 8) as usize] & (1 << (p % 8)) != 0)
    }

    /// `BLM1`, then m, k, n, seed0, seed1 as 8-byte LE, then `ceil(m/8)` bytes
    /// of bits (bit `i` is bit `i % 8` of byte `i / 8`).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(44 + self.bits.len());
        out.extend_from_slice(MAGIC);
        for v in [self.m, u64::from(self.k), self.n, self.seeds[0], self.seeds[1]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.bits);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let err = |reason: &str| IndexError::Decode {
            what: "bloom filter",
            reason: reason.to_string(),
        };
        if bytes.len() < 44 || &bytes[..4] != MAGIC {
            return Err(err("missing BLM1 header"));
        }
        let field = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().expect("8 bytes"));
        let (m, k, n) = (field(0), field(1), field(2));
        if m == 0 || k == 0 || k > u64::from(MAX_HASHES) {
            return Err(err("m or k out of range"));
        }
        let body = &bytes[44..];
        if body.len() as u64 != m.div_ceil(8) {
            return Err(err("bit array length does not match m"));
        }
        Ok(BloomFilter {
            m,
            k: k as u32,
            n,
            seeds: [field(3), field(4)],
            bits: body.to_vec(),
        })
    }
}
