//! UTC second timestamps. Date-only inputs resolve to midnight UTC;
//! datetimes without an offset are read as UTC.

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use thiserror::Error;

/// Seconds since the Unix epoch, UTC.
pub type UnixSeconds = i64;

/// 2000-01-01T00:00:00Z
pub const EARLIEST_CHECK_DATE: UnixSeconds = 946_684_800;
pub const SECONDS_PER_DAY: UnixSeconds = 86_400;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unrecognised timestamp {0:?}; expected epoch seconds, YYYY-MM-DD or an ISO-8601 datetime")]
pub struct TimestampError(pub String);

pub fn parse(text: &str) -> Result<UnixSeconds, TimestampError> {
    let s = text.trim();
    if !s.is_empty()
        && s.bytes()
            .enumerate()
            .all(|(i, b)| b.is_ascii_digit() || (i == 0 && b == b'-'))
    {
        return s.parse().map_err(|_| TimestampError(text.to_string()));
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc().timestamp());
        }
    }
    Err(TimestampError(text.to_string()))
}

/// `YYYY-MM-DDTHH:MM:SSZ`
pub fn format(ts: UnixSeconds) -> String {
    match Utc.timestamp_opt(ts, 0).single() {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => ts.to_string(),
    }
}

pub fn now() -> UnixSeconds {
    Utc::now().timestamp()
}
