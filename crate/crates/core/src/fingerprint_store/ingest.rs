use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{FingerprintRecord, Verdict};
use crate::pdq::{self, pnm};
use crate::timestamp::{self, UnixSeconds};

const HEADER: [&str; 6] = ["id", "image_path", "verdict", "check_date", "agency", "url"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read fact-check listing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("fact-check listing header must be `id,image_path,verdict,check_date,agency,url`, got `{0}`")]
    Header(String),
    #[error("fact-check listing is not valid CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// A rejected row; ingestion continues past it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line in the listing.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<FingerprintRecord>,
    pub errors: Vec<RowError>,
}

#[derive(Deserialize)]
struct Row {
    id: String,
    image_path: String,
    verdict: String,
    check_date: String,
    agency: String,
    url: String,
}

/// Records that go into device bundles by default.
pub fn bundle_eligible(records: &[FingerprintRecord]) -> impl Iterator<Item = &FingerprintRecord> {
    records.iter().filter(|r| r.verdict == Verdict::Misinformation)
}

/// Parses a `id,image_path,verdict,check_date,agency,url` listing and hashes
/// each referenced image. Relative image paths resolve against `base_dir`.
pub fn ingest_factchecks(reader: impl Read, base_dir: &Path, now: UnixSeconds) -> Result<IngestReport, IngestError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers()?.clone();
    if !header.iter().eq(HEADER) {
        return Err(IngestError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for row in csv.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed: Row = match row.deserialize(Some(&header)) {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        match ingest_row(parsed, base_dir, now, &mut seen) {
            Ok(record) => report.records.push(record),
            Err(message) => report.errors.push(RowError { line, message }),
        }
    }
    Ok(report)
}

fn ingest_row(
    row: Row,
    base_dir: &Path,
    now: UnixSeconds,
    seen: &mut HashSet<u64>,
) -> Result<FingerprintRecord, String> {
    let id: u64 = row.id.parse().map_err(|_| format!("invalid id {:?}", row.id))?;
    if !seen.insert(id) {
        return Err(format!("duplicate id {id}"));
    }
    let verdict: Verdict = row.verdict.parse().map_err(|e| format!("{e}"))?;
    let check_date = timestamp::parse(&row.check_date).map_err(|e| e.to_string())?;
    let path = base_dir.join(&row.image_path);
    let image = pnm::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let record = FingerprintRecord {
        id,
        hash: pdq::hash(&image).bits,
        verdict,
        check_date,
        agency: row.agency,
        url: row.url,
    };
    record.validate(now).map_err(|e| e.to_string())?;
    Ok(record)
}

pub fn ingest_factchecks_file(path: &Path, now: UnixSeconds) -> Result<IngestReport, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    ingest_factchecks(file, base, now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdq::RasterImage;
    use std::fs;

    const NOW: UnixSeconds = 1_700_000_000;

    fn write_pgm(dir: &Path, name: &str, img: &RasterImage) {
        fs::write(dir.join(name), pnm::encode_pnm(img)).unwrap();
    }

    fn gradient(shift: usize) -> RasterImage {
        RasterImage::from_fn_gray(80, 60, |x, y| ((x * 3 + y * 2 + shift) % 256) as u8).unwrap()
    }

    #[test]
    fn empty_listing() {
        let dir = tempfile::tempdir().unwrap();
        let report = ingest_factchecks(HEADER.join(",").as_bytes(), dir.path(), NOW).unwrap();
        assert!(report.records.is_empty());
        assert!(report.errors.is_empty());
    }

    #[test]
    fn three_rows_two_eligible() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_pgm(dir.path(), &format!("img{i}.pgm"), &gradient(i * 50));
        }
        let csv = "id,image_path,verdict,check_date,agency,url\n\
                   1,img0.pgm,fake,2019-04-11,Lupa,https://a.example/1\n\
                   2,img1.pgm,true,2019-05-01,Boom,https://a.example/2\n\
                   3,img2.pgm,false,2019-06-01T10:00:00Z,Lupa,https://a.example/3\n";
        let report = ingest_factchecks(csv.as_bytes(), dir.path(), NOW).unwrap();
        assert_eq!(report.errors, vec![]);
        assert_eq!(report.records.len(), 3);
        assert_eq!(bundle_eligible(&report.records).count(), 2);
        assert_eq!(report.records[0].check_date, 1_554_940_800);
        assert_eq!(report.records[0].hash, pdq::hash(&gradient(0)).bits);
        assert_eq!(report.records[2].hash, pdq::hash(&gradient(100)).bits);
    }

    #[test]
    fn row_errors_are_collected() {
        let dir = tempfile::tempdir().unwrap();
        write_pgm(dir.path(), "ok.pgm", &gradient(0));
        let csv = "id,image_path,verdict,check_date,agency,url\n\
                   1,missing.pgm,fake,2019-04-11,A,https://a.example/1\n\
                   2,ok.pgm,fake,11/04/2019,A,https://a.example/2\n\
                   3,ok.pgm,fake,2019-04-11,A,https://a.example/3\n\
                   3,ok.pgm,fake,2019-04-11,A,https://a.example/3\n\
                   x,ok.pgm,fake,2019-04-11,A,https://a.example/4\n\
                   5,ok.pgm,fake,2019-04-11,A,\n\
                   6,ok.pgm,rumour,2019-04-11,A,https://a.example/6\n";
        let report = ingest_factchecks(csv.as_bytes(), dir.path(), NOW).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].id, 3);
        let lines: Vec<u64> = report.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 5, 6, 7, 8]);
        assert!(report.errors[0].message.contains("missing.pgm"));
    }

    #[test]
    fn bad_header_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest_factchecks("id,path\n".as_bytes(), dir.path(), NOW).unwrap_err();
        assert!(matches!(err, IngestError::Header(_)));
    }

    #[test]
    fn file_entry_point_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("imgs")).unwrap();
        write_pgm(&dir.path().join("imgs"), "a.pgm", &gradient(7));
        let listing = dir.path().join("checks.csv");
        fs::write(
            &listing,
            "id,image_path,verdict,check_date,agency,url\n1,imgs/a.pgm,fake,2019-04-11,A,https://a.example/1\n",
        )
        .unwrap();
        let report = ingest_factchecks_file(&listing, NOW).unwrap();
        assert_eq!(report.records.len(), 1);
        assert!(matches!(
            ingest_factchecks_file(&dir.path().join("nope.csv"), NOW),
            Err(IngestError::Io { .. })
        ));
    }
}
