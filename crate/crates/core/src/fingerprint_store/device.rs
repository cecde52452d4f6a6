use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bundle::{BundleError, MacKey, UpdateBundle};
use super::{FingerprintRecord, Verdict};
use crate::match_index::{IndexError, MihIndex};
use crate::pdq::HashBits;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplyError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("stale bundle: version {offered} is not newer than applied version {current}")]
    Stale { current: u64, offered: u64 },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("malformed device file: {0}")]
    Format(String),
}

/// The best fact-check hit for a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactCheckMatch {
    pub distance: u32,
    pub record: FingerprintRecord,
}

/// The fingerprints held on one device. Immutable: applying a bundle yields
/// a new set, so readers can keep an old snapshot.
/// Invariant: `index` holds exactly the hashes of `records`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DeviceFingerprintSet {
    version: u64,
    index: MihIndex,
    records: BTreeMap<u64, FingerprintRecord>,
}

#[derive(Serialize, Deserialize)]
struct DeviceFile {
    records: Vec<FingerprintRecord>,
    version: u64,
}

impl DeviceFingerprintSet {
    pub fn empty() -> Self {
        Self::default()
    }

    fn from_parts(version: u64, records: BTreeMap<u64, FingerprintRecord>) -> Result<Self, IndexError> {
        let index = MihIndex::build(records.values().map(|r| (r.id, r.hash)))?;
        Ok(DeviceFingerprintSet {
            version,
            index,
            records,
        })
    }

    /// Applied bundle version; 0 before the first bundle.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn index(&self) -> &MihIndex {
        &self.index
    }

    pub fn record(&self, id: u64) -> Option<&FingerprintRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &FingerprintRecord> {
        self.records.values()
    }

    /// Authenticates `bundle`, requires a strictly newer version, and merges
    /// its records over the current ones (same id: bundle wins).
    pub fn apply_bundle(&self, bundle: &UpdateBundle, key: &MacKey) -> Result<Self, ApplyError> {
        bundle.verify(key)?;
        if bundle.version <= self.version {
            return Err(ApplyError::Stale {
                current: self.version,
                offered: bundle.version,
            });
        }
        let mut records = self.records.clone();
        for r in &bundle.records {
            records.insert(r.id, r.clone());
        }
        Ok(Self::from_parts(bundle.version, records)?)
    }

    /// Closest `Misinformation` record within `radius`; ties go to the lower id.
    pub fn lookup(&self, h: &HashBits, radius: u32) -> Result<Option<FactCheckMatch>, IndexError> {
        let hits = self.index.query(h, radius)?;
        Ok(hits.into_iter().find_map(|m| {
            let record = &self.records[&m.id];
            (record.verdict == Verdict::Misinformation).then(|| FactCheckMatch {
                distance: m.distance,
                record: record.clone(),
            })
        }))
    }

    /// `{"records":[...],"version":N}` with records in id order, newline-terminated.
    pub fn to_json(&self) -> Vec<u8> {
        let file = DeviceFile {
            records: self.records.values().cloned().collect(),
            version: self.version,
        };
        let value = serde_json::to_value(&file).expect("device file serializes");
        let mut out = serde_json::to_vec(&value).expect("JSON values always serialize");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ApplyError> {
        let file: DeviceFile = serde_json::from_slice(bytes).map_err(|e| ApplyError::Format(e.to_string()))?;
        let mut records = BTreeMap::new();
        for r in file.records {
            if let Some(prev) = records.insert(r.id, r) {
                return Err(ApplyError::Format(format!("record id {} repeated", prev.id)));
            }
        }
        Ok(Self::from_parts(file.version, records)?)
    }
}
