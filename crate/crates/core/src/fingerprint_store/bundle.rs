use std::collections::BTreeSet;
use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{FingerprintRecord, RecordError, Verdict};
use crate::timestamp::UnixSeconds;

type HmacSha256 = Hmac<Sha256>;

/// Shared secret authenticating bundles. Never printed.
#[derive(Clone, PartialEq, Eq)]
pub struct MacKey(Vec<u8>);

impl MacKey {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        MacKey(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for MacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MacKey({} bytes)", self.0.len())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BundleError {
    #[error("bundle version must be greater than 0")]
    ZeroVersion,
    #[error("refusing to build an empty bundle without the empty-bundle flag")]
    Empty,
    #[error("record id {0} appears more than once")]
    DuplicateId(u64),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("malformed bundle: {0}")]
    Format(String),
    #[error("bundle bytes are not in canonical form")]
    NonCanonical,
    #[error("checksum does not match bundle contents")]
    ChecksumMismatch,
    #[error("authentication tag rejected")]
    BadMac,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BundleOptions {
    /// Ship every verdict, not only `Misinformation`.
    pub include_all: bool,
    pub allow_empty: bool,
}

/// A versioned, authenticated batch of fingerprint records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateBundle {
    pub version: u64,
    pub created_at: UnixSeconds,
    /// Sorted by id, ids unique.
    pub records: Vec<FingerprintRecord>,
    pub checksum: [u8; 32],
    pub mac: [u8; 32],
}

/// Sorted-key compact JSON of `{created_at, records, version}`.
fn canonical_payload(version: u64, created_at: UnixSeconds, records: &[FingerprintRecord]) -> Vec<u8> {
    let value = json!({
        "created_at": created_at,
        "records": records,
        "version": version,
    });
    // serde_json's default map is ordered by key, giving sorted keys at every depth.
    serde_json::to_vec(&value).expect("JSON values always serialize")
}

fn checksum_of(payload: &[u8]) -> [u8; 32] {
    Sha256::digest(payload).into()
}

fn keyed_mac(key: &MacKey) -> HmacSha256 {
    <HmacSha256 as KeyInit>::new_from_slice(key.as_bytes()).expect("HMAC accepts any key length")
}

pub fn mac_over_checksum(key: &MacKey, checksum: &[u8; 32]) -> [u8; 32] {
    let mut mac = keyed_mac(key);
    mac.update(checksum);
    mac.finalize().into_bytes().into()
}

/// Packs records into a signed bundle. Only `Misinformation` records are
/// kept unless `options.include_all` is set; the result is sorted by id.
/// `created_at` doubles as "now" for record date validation.
pub fn build_bundle(
    records: &[FingerprintRecord],
    version: u64,
    created_at: UnixSeconds,
    key: &MacKey,
    options: BundleOptions,
) -> Result<UpdateBundle, BundleError> {
    if version == 0 {
        return Err(BundleError::ZeroVersion);
    }
    let mut kept: Vec<FingerprintRecord> = records
        .iter()
        .filter(|r| options.include_all || r.verdict == Verdict::Misinformation)
        .cloned()
        .collect();
    if kept.is_empty() && !options.allow_empty {
        return Err(BundleError::Empty);
    }
    kept.sort_by_key(|r| r.id);
    if let Some(w) = kept.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(BundleError::DuplicateId(w[0].id));
    }
    for r in &kept {
        r.validate(created_at)?;
    }
    let checksum = checksum_of(&canonical_payload(version, created_at, &kept));
    let mac = mac_over_checksum(key, &checksum);
    Ok(UpdateBundle {
        version,
        created_at,
        records: kept,
        checksum,
        mac,
    })
}

impl UpdateBundle {
    pub fn canonical_payload(&self) -> Vec<u8> {
        canonical_payload(self.version, self.created_at, &self.records)
    }

    /// Checksum first, then the tag; the tag comparison is constant-time.
    pub fn verify(&self, key: &MacKey) -> Result<(), BundleError> {
        if checksum_of(&self.canonical_payload()) != self.checksum {
            return Err(BundleError::ChecksumMismatch);
        }
        let mut mac = keyed_mac(key);
        mac.update(&self.checksum);
        mac.verify_slice(&self.mac).map_err(|_| BundleError::BadMac)
    }

    /// Sorted-key compact JSON terminated by a newline.
    pub fn to_json(&self) -> Vec<u8> {
        let value = json!({
            "checksum_hex": hex::encode(self.checksum),
            "created_at": self.created_at,
            "mac_hex": hex::encode(self.mac),
            "records": self.records,
            "version": self.version,
        });
        let mut out = serde_json::to_vec(&value).expect("JSON values always serialize");
        out.push(b'\n');
        out
    }

    /// Strict parse: the input must be exactly the canonical encoding of the
    /// bundle it describes. Authentication is a separate step, [`Self::verify`].
    pub fn from_json(bytes: &[u8]) -> Result<Self, BundleError> {
        let fmt_err = |e: &dyn fmt::Display| BundleError::Format(e.to_string());
        let value: Value = serde_json::from_slice(bytes).map_err(|e| fmt_err(&e))?;
        let obj = value
            .as_object()
            .ok_or_else(|| BundleError::Format("top level is not an object".into()))?;
        let expected: BTreeSet<&str> = ["checksum_hex", "created_at", "mac_hex", "records", "version"].into();
        let present: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
        if present != expected {
            return Err(BundleError::Format(format!(
                "fields {present:?}, expected {expected:?}"
            )));
        }
        let digest = |name: &str| -> Result<[u8; 32], BundleError> {
            let text = obj[name]
                .as_str()
                .ok_or_else(|| BundleError::Format(format!("{name} is not a string")))?;
            let mut out = [0u8; 32];
            hex::decode_to_slice(text, &mut out).map_err(|e| BundleError::Format(format!("{name}: {e}")))?;
            Ok(out)
        };
        let bundle = UpdateBundle {
            version: obj["version"]
                .as_u64()
                .ok_or_else(|| BundleError::Format("version is not an unsigned integer".into()))?,
            created_at: obj["created_at"]
                .as_i64()
                .ok_or_else(|| BundleError::Format("created_at is not an integer".into()))?,
            records: serde_json::from_value(obj["records"].clone()).map_err(|e| fmt_err(&e))?,
            checksum: digest("checksum_hex")?,
            mac: digest("mac_hex")?,
        };
        if bundle.to_json() != bytes {
            return Err(BundleError::NonCanonical);
        }
        Ok(bundle)
    }
}
