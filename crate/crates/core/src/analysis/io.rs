use std::io::Read;

use serde::Deserialize;

use super::{AnalysisError, CheckEntry, ShareEvent};
use crate::timestamp;

const SHARE_HEADER: &str = "image_id,group_id,timestamp";
const CHECK_HEADER: &str = "image_id,check_date,agency,url";

#[derive(Deserialize)]
struct ShareRow {
    image_id: u64,
    group_id: String,
    timestamp: String,
}

#[derive(Deserialize)]
struct CheckRow {
    image_id: u64,
    check_date: String,
    agency: String,
    url: String,
}

fn rows<T: for<'de> Deserialize<'de>>(
    reader: impl Read,
    what: &'static str,
    expected: &'static str,
) -> Result<Vec<(u64, T)>, AnalysisError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| AnalysisError::Row {
            what,
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let found = header.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(AnalysisError::Header { what, expected, found });
    }
    let mut out = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| AnalysisError::Row {
            what,
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record.deserialize(Some(&header)).map_err(|e| AnalysisError::Row {
            what,
            line,
            message: e.to_string(),
        })?;
        out.push((line, row));
    }
    Ok(out)
}

/// CSV `image_id,group_id,timestamp`; timestamps are epoch seconds or ISO-8601.
pub fn read_share_log(reader: impl Read) -> Result<Vec<ShareEvent>, AnalysisError> {
    rows::<ShareRow>(reader, "share log", SHARE_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let timestamp = timestamp::parse(&r.timestamp).map_err(|e| AnalysisError::Row {
                what: "share log",
                line,
                message: e.to_string(),
            })?;
            Ok(ShareEvent {
                image_id: r.image_id,
                group_id: r.group_id,
                timestamp,
            })
        })
        .collect()
}

/// CSV `image_id,check_date,agency,url`; date-only values mean midnight UTC.
pub fn read_checks(reader: impl Read) -> Result<Vec<CheckEntry>, AnalysisError> {
    rows::<CheckRow>(reader, "check table", CHECK_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let check_date = timestamp::parse(&r.check_date).map_err(|e| AnalysisError::Row {
                what: "check table",
                line,
                message: e.to_string(),
            })?;
            Ok(CheckEntry {
                image_id: r.image_id,
                check_date,
                agency: r.agency,
                url: r.url,
            })
        })
        .collect()
}
