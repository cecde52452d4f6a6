use std::fmt::Write as _;

use super::ImageShareSummary;

/// Empirical CDFs of per-image share counts. Each point `(x, y)` gives the
/// fraction `y` of images with count `<= x`, one point per distinct count.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CdfSeries {
    pub before: Vec<(u64, f64)>,
    pub after: Vec<(u64, f64)>,
}

fn ecdf(mut values: Vec<u64>) -> Vec<(u64, f64)> {
    values.sort_unstable();
    let n = values.len() as f64;
    let mut out: Vec<(u64, f64)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let y = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = y,
            _ => out.push((v, y)),
        }
    }
    out
}

pub fn cdf_series(summaries: &[ImageShareSummary]) -> CdfSeries {
    CdfSeries {
        before: ecdf(summaries.iter().map(|s| s.shares_before).collect()),
        after: ecdf(summaries.iter().map(|s| s.shares_after).collect()),
    }
}

impl CdfSeries {
    /// Two tab-separated columns with a header row.
    pub fn to_tsv(points: &[(u64, f64)]) -> String {
        let mut out = String::from("shares\tcumulative_fraction\n");
        for (x, y) in points {
            writeln!(out, "{x}\t{y:.6}").expect("writing to a String");
        }
        out
    }
}
