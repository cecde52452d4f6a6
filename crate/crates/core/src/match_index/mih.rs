use std::collections::HashSet;

use super::{IndexError, MatchResult};
use crate::pdq::HashBits;

/// Number of 8-bit chunks per fingerprint.
pub const CHUNKS: usize = 32;
/// Largest radius with a pigeonhole guarantee: at most 31 differing bits
/// leave at least one of the 32 chunks untouched.
pub const MAX_RADIUS: u32 = CHUNKS as u32 - 1;

const MAGIC: &[u8; 4] = b"MIH1";
const BUCKETS: usize = 256;

/// Multi-index hash table. Each fingerprint byte position has its own
/// 256-bucket table listing the entries with that byte value.
#[derive(Clone, Debug)]
pub struct MihIndex {
    entries: Vec<(u64, HashBits)>,
    // tables[chunk * 256 + value] -> entry positions
    tables: Vec<Vec<u32>>,
}

impl PartialEq for MihIndex {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Eq for MihIndex {}

impl Default for MihIndex {
    fn default() -> Self {
        MihIndex {
            entries: Vec::new(),
            tables: vec![Vec::new(); CHUNKS * BUCKETS],
        }
    }
}

impl MihIndex {
    pub fn build(entries: impl IntoIterator<Item = (u64, HashBits)>) -> Result<Self, IndexError> {
        let mut index = MihIndex::default();
        let mut seen = HashSet::new();
        for (id, bits) in entries {
            if !seen.insert(id) {
                return Err(IndexError::DuplicateId(id));
            }
            let pos = u32::try_from(index.entries.len()).expect("index holds < 2^32 entries");
            for (chunk, &value) in bits.as_bytes().iter().enumerate() {
                index.tables[chunk * BUCKETS + value as usize].push(pos);
            }
            index.entries.push((id, bits));
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u64, HashBits)] {
        &self.entries
    }

    /// How many bucket lists hold the entry at `pos`; always [`CHUNKS`].
    pub fn bucket_memberships(&self, pos: usize) -> usize {
        let needle = pos as u32;
        self.tables.iter().filter(|b| b.contains(&needle)).count()
    }

    /// All entries within `radius`, sorted by distance then id.
    pub fn query(&self, q: &HashBits, radius: u32) -> Result<Vec<MatchResult>, IndexError> {
        if radius > MAX_RADIUS {
            return Err(IndexError::UnsupportedRadius(radius));
        }
        // Any r + 1 chunks contain one that matches exactly.
        let probes = radius as usize + 1;
        let mut candidates: Vec<u32> = q.as_bytes()[..probes]
            .iter()
            .enumerate()
            .flat_map(|(chunk, &value)| self.tables[chunk * BUCKETS + value as usize].iter().copied())
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut out: Vec<MatchResult> = candidates
            .into_iter()
            .filter_map(|pos| {
                let (id, bits) = &self.entries[pos as usize];
                let distance = bits.distance(q);
                (distance <= radius).then_some(MatchResult { distance, id: *id })
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Exhaustive scan, usable at any radius.
    pub fn linear_scan(&self, q: &HashBits, radius: u32) -> Vec<MatchResult> {
        let mut out: Vec<MatchResult> = self
            .entries
            .iter()
            .filter_map(|(id, bits)| {
                let distance = bits.distance(q);
                (distance <= radius).then_some(MatchResult { distance, id: *id })
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// `MIH1`, entry count (8-byte LE), then per entry an 8-byte LE id and
    /// the 32 fingerprint bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.entries.len() * 40);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (id, bits) in &self.entries {
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(bits.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let err = |reason: String| IndexError::Decode { what: "index", reason };
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(err("missing MIH1 header".into()));
        }
        let count = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
        let body = &bytes[12..];
        if count.checked_mul(40) != Some(body.len() as u64) {
            return Err(err(format!("{} body bytes for {count} entries", body.len())));
        }
        let entries = body.chunks_exact(40).map(|rec| {
            let id = u64::from_le_bytes(rec[..8].try_into().expect("8 bytes"));
            let bits: [u8; 32] = rec[8..].try_into().expect("32 bytes");
            (id, HashBits::from_bytes(bits))
        });
        Self::build(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut impl Rng) -> HashBits {
        HashBits::from_bytes(rng.random())
    }

    fn flip_n(h: &HashBits, n: usize, rng: &mut impl Rng) -> HashBits {
        let mut out = *h;
        for i in rand::seq::index::sample(rng, 256, n) {
            out.flip(i);
        }
        out
    }

    #[test]
    fn empty_index() {
        let idx = MihIndex::build([]).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.tables.len(), CHUNKS * BUCKETS);
        assert!(idx.query(&HashBits::ZERO, 31).unwrap().is_empty());
    }

    #[test]
    fn single_entry_radius_zero() {
        let h = HashBits::from_bytes([3; 32]);
        let idx = MihIndex::build([(9, h)]).unwrap();
        assert_eq!(idx.query(&h, 0).unwrap(), vec![MatchResult { distance: 0, id: 9 }]);
        assert_eq!(idx.bucket_memberships(0), CHUNKS);
    }

    #[test]
    fn duplicate_ids_rejected_duplicate_hashes_kept() {
        let h = HashBits::from_bytes([1; 32]);
        assert_eq!(MihIndex::build([(1, h), (1, h)]), Err(IndexError::DuplicateId(1)));
        let idx = MihIndex::build([(2, h), (1, h)]).unwrap();
        let ids: Vec<u64> = idx.query(&h, 0).unwrap().iter().map(|m| m.id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn radius_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_bits(&mut rng);
        let idx = MihIndex::build([(1, h)]).unwrap();
        assert_eq!(idx.query(&h, 32), Err(IndexError::UnsupportedRadius(32)));
        let far = flip_n(&h, 32, &mut rng);
        assert!(idx.query(&far, 31).unwrap().is_empty());
        let near = flip_n(&h, 31, &mut rng);
        assert_eq!(idx.query(&near, 31).unwrap(), vec![MatchResult { distance: 31, id: 1 }]);
    }

    #[test]
    fn worst_case_spread_is_still_found() {
        // One flipped bit in each of 31 chunks leaves exactly one chunk intact.
        let h = HashBits::from_bytes([0xff; 32]);
        for untouched in [0usize, 17, 31] {
            let mut q = h;
            for chunk in (0..32).filter(|&c| c != untouched) {
                q.flip(chunk * 8 + 3);
            }
            let idx = MihIndex::build([(5, h)]).unwrap();
            assert_eq!(idx.query(&q, 31).unwrap(), vec![MatchResult { distance: 31, id: 5 }]);
        }
    }

    #[test]
    fn agrees_with_brute_force_on_clustered_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centers: Vec<HashBits> = (0..20).map(|_| random_bits(&mut rng)).collect();
        let mut entries = Vec::new();
        for id in 0..2000u64 {
            let c = &centers[rng.random_range(0..centers.len())];
            let flips = rng.random_range(0..40);
            entries.push((id * 3 + 1, flip_n(c, flips, &mut rng)));
        }
        let idx = MihIndex::build(entries.clone()).unwrap();
        for _ in 0..50 {
            let c = &centers[rng.random_range(0..centers.len())];
            let q = flip_n(c, rng.random_range(0..20), &mut rng);
            for radius in [0, 5, 16, 31] {
                let mut expected: Vec<MatchResult> = entries
                    .iter()
                    .filter_map(|(id, h)| {
                        let d = (0..256).filter(|&i| h.bit(i) != q.bit(i)).count() as u32;
                        (d <= radius).then_some(MatchResult { distance: d, id: *id })
                    })
                    .collect();
                expected.sort();
                assert_eq!(idx.query(&q, radius).unwrap(), expected);
            }
        }
    }

    #[test]
    fn serialization_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let idx = MihIndex::build((0..10).map(|i| (i * 7, random_bits(&mut rng)))).unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..4], b"MIH1");
        assert_eq!(bytes.len(), 12 + 10 * 40);
        let back = MihIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.to_bytes(), bytes);
        assert!(MihIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
