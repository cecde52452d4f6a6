//! The fact-check fingerprint database and the signed update bundles that
//! carry it to devices.

mod bundle;
mod device;
mod ingest;

pub use bundle::{build_bundle, BundleError, BundleOptions, MacKey, UpdateBundle};
pub use device::{ApplyError, DeviceFingerprintSet, FactCheckMatch};
pub use ingest::{bundle_eligible, ingest_factchecks, ingest_factchecks_file, IngestError, IngestReport, RowError};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pdq::HashBits;
use crate::timestamp::{self, UnixSeconds, EARLIEST_CHECK_DATE, SECONDS_PER_DAY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Misinformation,
    True,
    Unverified,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Misinformation => "misinformation",
            Verdict::True => "true",
            Verdict::Unverified => "unverified",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown verdict {0:?}")]
pub struct UnknownVerdict(pub String);

impl FromStr for Verdict {
    type Err = UnknownVerdict;

    /// Agencies label debunked content in several ways; all map to
    /// `Misinformation`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "misinformation" | "fake" | "false" | "misleading" => Ok(Verdict::Misinformation),
            "true" => Ok(Verdict::True),
            "unverified" | "unknown" => Ok(Verdict::Unverified),
            _ => Err(UnknownVerdict(s.to_string())),
        }
    }
}

/// A fact-checked image: its fingerprint and the published verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub id: u64,
    #[serde(rename = "hash_hex")]
    pub hash: HashBits,
    pub verdict: Verdict,
    pub check_date: UnixSeconds,
    pub agency: String,
    pub url: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecordError {
    #[error("record {0}: a {1} verdict needs a fact-check url")]
    MissingUrl(u64, Verdict),
    #[error("record {id}: check date {date} outside [2000-01-01, now + 1 day]")]
    CheckDateOutOfRange { id: u64, date: String },
}

impl FingerprintRecord {
    pub fn validate(&self, now: UnixSeconds) -> Result<(), RecordError> {
        if matches!(self.verdict, Verdict::Misinformation | Verdict::True) && self.url.trim().is_empty() {
            return Err(RecordError::MissingUrl(self.id, self.verdict));
        }
        if self.check_date < EARLIEST_CHECK_DATE || self.check_date > now + SECONDS_PER_DAY {
            return Err(RecordError::CheckDateOutOfRange {
                id: self.id,
                date: timestamp::format(self.check_date),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn record(id: u64, bits: HashBits, verdict: Verdict) -> FingerprintRecord {
        FingerprintRecord {
            id,
            hash: bits,
            verdict,
            check_date: 1_554_940_800,
            agency: "agency".into(),
            url: format!("https://factcheck.example/{id}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::record;
    use super::*;

    #[test]
    fn verdict_aliases() {
        assert_eq!("FAKE".parse(), Ok(Verdict::Misinformation));
        assert_eq!("false".parse(), Ok(Verdict::Misinformation));
        assert_eq!(" true ".parse(), Ok(Verdict::True));
        assert_eq!("unverified".parse(), Ok(Verdict::Unverified));
        assert!("maybe".parse::<Verdict>().is_err());
    }

    #[test]
    fn record_validation() {
        let now = 1_700_000_000;
        let ok = record(1, HashBits::ZERO, Verdict::Misinformation);
        assert_eq!(ok.validate(now), Ok(()));

        let mut no_url = ok.clone();
        no_url.url.clear();
        assert_eq!(
            no_url.validate(now),
            Err(RecordError::MissingUrl(1, Verdict::Misinformation))
        );
        no_url.verdict = Verdict::Unverified;
        assert_eq!(no_url.validate(now), Ok(()));

        let mut old = ok.clone();
        old.check_date = EARLIEST_CHECK_DATE - 1;
        assert!(old.validate(now).is_err());
        let mut future = ok;
        future.check_date = now + SECONDS_PER_DAY;
        assert!(future.validate(now).is_ok());
        future.check_date += 1;
        assert!(future.validate(now).is_err());
    }

    #[test]
    fn json_field_names() {
        let r = record(7, HashBits::from_bytes([0xab; 32]), Verdict::True);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["hash_hex"], "ab".repeat(32));
        assert_eq!(v["verdict"], "true");
        assert_eq!(v["check_date"], 1_554_940_800);
        let back: FingerprintRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
