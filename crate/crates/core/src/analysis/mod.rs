//! Share-log analytics: how many shares of each debunked image happened
//! before and after its first fact-check.
//!
//! An event at exactly the check date counts as after. Percentages are
//! rounded half-up to one decimal using integer arithmetic.

mod cdf;
mod io;

pub use cdf::{cdf_series, CdfSeries};
pub use io::{read_checks, read_share_log};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Outcome, SimReport, Stage};
use crate::timestamp::UnixSeconds;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("{what} line {line}: {message}")]
    Row {
        what: &'static str,
        line: u64,
        message: String,
    },
    #[error("{what} header must be `{expected}`, got `{found}`")]
    Header {
        what: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("outlier threshold must be at least 1")]
    Threshold,
    #[error("simulation reports prevented shares for images absent from the summaries: {0:?}")]
    IdSpace(Vec<u64>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareEvent {
    pub image_id: u64,
    /// Anonymised group token.
    pub group_id: String,
    pub timestamp: UnixSeconds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub image_id: u64,
    pub check_date: UnixSeconds,
    pub agency: String,
    pub url: String,
}

/// Earliest check date per image.
pub fn first_check_dates(entries: &[CheckEntry]) -> BTreeMap<u64, UnixSeconds> {
    let mut out = BTreeMap::new();
    for e in entries {
        out.entry(e.image_id)
            .and_modify(|d: &mut UnixSeconds| *d = (*d).min(e.check_date))
            .or_insert(e.check_date);
    }
    out
}

/// Half-open study period `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StudyWindow {
    pub start: UnixSeconds,
    pub end: UnixSeconds,
}

impl StudyWindow {
    pub fn contains(&self, t: UnixSeconds) -> bool {
        (self.start..self.end).contains(&t)
    }

    /// Splits into (inside, outside), preserving order.
    pub fn partition(&self, events: &[ShareEvent]) -> (Vec<ShareEvent>, Vec<ShareEvent>) {
        events.iter().cloned().partition(|e| self.contains(e.timestamp))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShareSummary {
    pub image_id: u64,
    pub shares_before: u64,
    pub shares_after: u64,
    pub first_check_date: UnixSeconds,
}

impl ImageShareSummary {
    pub fn total(&self) -> u64 {
        self.shares_before + self.shares_after
    }
}

/// An event whose image has no check date; it is skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownImage {
    /// Position in the input.
    pub index: usize,
    pub image_id: u64,
}

/// Per-image before/after counts, ordered by image id. Images without
/// events are omitted.
pub fn summarize(
    events: &[ShareEvent],
    checks: &BTreeMap<u64, UnixSeconds>,
) -> (Vec<ImageShareSummary>, Vec<UnknownImage>) {
    let mut by_image: BTreeMap<u64, ImageShareSummary> = BTreeMap::new();
    let mut unknown = Vec::new();
    for (index, e) in events.iter().enumerate() {
        let Some(&check) = checks.get(&e.image_id) else {
            unknown.push(UnknownImage {
                index,
                image_id: e.image_id,
            });
            continue;
        };
        let s = by_image.entry(e.image_id).or_insert(ImageShareSummary {
            image_id: e.image_id,
            shares_before: 0,
            shares_after: 0,
            first_check_date: check,
        });
        if e.timestamp >= check {
            s.shares_after += 1;
        } else {
            s.shares_before += 1;
        }
    }
    (by_image.into_values().collect(), unknown)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub images_found: u64,
    pub total_shares: u64,
    /// Percent of shares at or after the check date, one decimal.
    pub pct_after: f64,
    pub max_shares_after: u64,
}

/// `round_half_up(1000 * num / den)`, i.e. a percentage in tenths.
pub fn percent_tenths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    let (num, den) = (u128::from(num), u128::from(den));
    ((2000 * num + den) / (2 * den)) as u64
}

pub fn aggregate(summaries: &[ImageShareSummary]) -> AggregateReport {
    let total: u64 = summaries.iter().map(ImageShareSummary::total).sum();
    let after: u64 = summaries.iter().map(|s| s.shares_after).sum();
    AggregateReport {
        images_found: summaries.len() as u64,
        total_shares: total,
        pct_after: percent_tenths(after, total) as f64 / 10.0,
        max_shares_after: summaries.iter().map(|s| s.shares_after).max().unwrap_or(0),
    }
}

impl AggregateReport {
    /// The percentage in tenths, exact.
    pub fn pct_after_tenths(&self) -> u64 {
        (self.pct_after * 10.0).round() as u64
    }

    /// Pretty JSON, newline-terminated.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }
}

/// Drops images with more than `max_total_shares` shares and re-aggregates.
pub fn exclude_outliers(
    summaries: &[ImageShareSummary],
    max_total_shares: u64,
) -> Result<(Vec<ImageShareSummary>, AggregateReport), AnalysisError> {
    if max_total_shares == 0 {
        return Err(AnalysisError::Threshold);
    }
    let kept: Vec<ImageShareSummary> = summaries
        .iter()
        .filter(|s| s.total() <= max_total_shares)
        .cloned()
        .collect();
    let report = aggregate(&kept);
    Ok((kept, report))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMismatch {
    pub image_id: u64,
    pub prevented: u64,
    pub shares_after: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub consistent: bool,
    pub prevented_total: u64,
    pub shares_after_total: u64,
    pub mismatched: Vec<ImageMismatch>,
}

/// Compares a blocking-policy simulation of a share log with the analysis
/// of the same log. Record ids in the report must be image ids.
pub fn cross_check_simulation(
    report: &SimReport,
    summaries: &[ImageShareSummary],
) -> Result<CrossCheck, AnalysisError> {
    let mut prevented: BTreeMap<u64, u64> = BTreeMap::new();
    for d in &report.decisions {
        if d.decision.stage == Stage::Send && d.decision.outcome == Outcome::Blocked {
            let id = d.decision.record_id.expect("blocked decisions carry a record");
            *prevented.entry(id).or_insert(0) += 1;
        }
    }
    let known: BTreeSet<u64> = summaries.iter().map(|s| s.image_id).collect();
    let foreign: Vec<u64> = prevented.keys().filter(|id| !known.contains(id)).copied().collect();
    if !foreign.is_empty() {
        return Err(AnalysisError::IdSpace(foreign));
    }
    let mismatched: Vec<ImageMismatch> = summaries
        .iter()
        .filter_map(|s| {
            let p = prevented.get(&s.image_id).copied().unwrap_or(0);
            (p != s.shares_after).then_some(ImageMismatch {
                image_id: s.image_id,
                prevented: p,
                shares_after: s.shares_after,
            })
        })
        .collect();
    let shares_after_total = summaries.iter().map(|s| s.shares_after).sum();
    Ok(CrossCheck {
        consistent: report.prevented_total == shares_after_total && mismatched.is_empty(),
        prevented_total: report.prevented_total,
        shares_after_total,
        mismatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ev(image_id: u64, timestamp: UnixSeconds) -> ShareEvent {
        ShareEvent {
            image_id,
            group_id: "g".into(),
            timestamp,
        }
    }

    fn summary(image_id: u64, before: u64, after: u64) -> ImageShareSummary {
        ImageShareSummary {
            image_id,
            shares_before: before,
            shares_after: after,
            first_check_date: 0,
        }
    }

    #[test]
    fn summarize_hand_counts() {
        let checks = BTreeMap::from([(1, 100)]);
        assert_eq!(summarize(&[], &checks), (vec![], vec![]));
        let events = [ev(1, 10), ev(1, 99), ev(1, 50), ev(1, 100), ev(1, 500), ev(2, 5)];
        let (s, unknown) = summarize(&events, &checks);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].shares_before, s[0].shares_after), (3, 2));
        assert_eq!(unknown, vec![UnknownImage { index: 5, image_id: 2 }]);
    }

    #[test]
    fn earliest_check_wins() {
        let entries = [
            CheckEntry {
                image_id: 1,
                check_date: 300,
                agency: "a".into(),
                url: "u".into(),
            },
            CheckEntry {
                image_id: 1,
                check_date: 200,
                agency: "b".into(),
                url: "u".into(),
            },
        ];
        assert_eq!(first_check_dates(&entries), BTreeMap::from([(1, 200)]));
    }

    #[test]
    fn summarize_matches_per_event_classifier() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let checks: BTreeMap<u64, UnixSeconds> = (0..50).map(|i| (i, rng.random_range(1_000..2_000))).collect();
        let events: Vec<ShareEvent> = (0..10_000)
            .map(|_| ev(rng.random_range(0..50), rng.random_range(500..2_500)))
            .collect();
        let (got, unknown) = summarize(&events, &checks);
        assert!(unknown.is_empty());
        // Oracle: classify each event independently and tally per image.
        let mut before = [0u64; 50];
        let mut after = [0u64; 50];
        for e in &events {
            let i = e.image_id as usize;
            if e.timestamp < checks[&e.image_id] {
                before[i] += 1;
            } else {
                after[i] += 1;
            }
        }
        for s in &got {
            let i = s.image_id as usize;
            assert_eq!((s.shares_before, s.shares_after), (before[i], after[i]));
        }
        let classified: u64 = got.iter().map(ImageShareSummary::total).sum();
        assert_eq!(classified, 10_000);
        assert_eq!(got.len(), (0..50).filter(|&i| before[i] + after[i] > 0).count());
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_tenths(899, 2209), 407);
        assert_eq!(percent_tenths(2420, 2944), 822);
        assert_eq!(percent_tenths(1331, 1855), 718);
        assert_eq!(percent_tenths(1, 8), 125);
        assert_eq!(percent_tenths(1, 16), 63); // 6.25 -> 6.3
        assert_eq!(percent_tenths(0, 0), 0);
        assert_eq!(percent_tenths(5, 5), 1000);
    }

    #[test]
    fn aggregate_examples() {
        let empty = aggregate(&[]);
        assert_eq!(empty.images_found, 0);
        assert_eq!(empty.pct_after, 0.0);
        let one = aggregate(&[summary(1, 0, 1)]);
        assert_eq!((one.pct_after, one.max_shares_after), (100.0, 1));
        let r = aggregate(&[summary(1, 3, 1), summary(2, 1, 3)]);
        assert_eq!(r.pct_after, 50.0);
        assert_eq!(r.max_shares_after, 3);
        assert_eq!(serde_json::to_value(&r).unwrap()["pct_after"], 50.0);
    }

    #[test]
    fn outlier_exclusion() {
        let s = vec![summary(1, 2, 0), summary(2, 0, 2)];
        assert_eq!(exclude_outliers(&s, 0), Err(AnalysisError::Threshold));
        let (kept, r) = exclude_outliers(&s, 1).unwrap();
        assert!(kept.is_empty());
        assert_eq!(r, aggregate(&[]));
        let (kept, r) = exclude_outliers(&s, 100).unwrap();
        assert_eq!(kept, s);
        assert_eq!(r, aggregate(&s));
        // The threshold is inclusive: totals equal to it stay.
        assert_eq!(exclude_outliers(&s, 2).unwrap().0.len(), 2);
    }

    #[test]
    fn cross_check_empty_is_consistent() {
        let c = cross_check_simulation(&SimReport::default(), &[]).unwrap();
        assert!(c.consistent);
        let c = cross_check_simulation(&SimReport::default(), &[summary(3, 2, 1)]).unwrap();
        assert!(!c.consistent);
        assert_eq!(c.mismatched[0].image_id, 3);
    }
}
