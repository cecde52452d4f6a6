use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use fcguard::analysis::{self, CdfSeries};
use fcguard::fingerprint_store::{
    build_bundle, bundle_eligible, ingest_factchecks_file, BundleOptions, DeviceFingerprintSet, MacKey, UpdateBundle,
};
use fcguard::match_index::MihIndex;
use fcguard::pdq::{self, pnm, HashBits};
use fcguard::pipeline::{run_scenario, FsAssets, SimConfig, SimReport, SimScript};
use fcguard::timestamp::{self, EARLIEST_CHECK_DATE};

use crate::args::{BundleCommand, Cli, Command, GlobalOpts, IndexCommand};

/// A non-zero exit with an optional message for standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const VERIFY: u8 = 1;
    pub const IO: u8 = 2;
    pub const USAGE: u8 = 64;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self::new(Self::IO, message)
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(Self::USAGE, message)
    }

    fn verify(message: impl Into<String>) -> Self {
        Self::new(Self::VERIFY, message)
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn emit(global: &GlobalOpts, bytes: &[u8]) -> CmdResult {
    match &global.out {
        Some(path) => write_file(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::io(format!("stdout: {e}"))),
    }
}

fn read_key(path: &Path) -> Result<MacKey, Failure> {
    let text =
        String::from_utf8(read(path)?).map_err(|_| Failure::io(format!("{}: key file is not text", path.display())))?;
    let bytes =
        hex::decode(text.trim()).map_err(|e| Failure::io(format!("{}: key file must be hex: {e}", path.display())))?;
    if bytes.is_empty() {
        return Err(Failure::io(format!("{}: key file is empty", path.display())));
    }
    Ok(MacKey::new(bytes))
}

fn note(global: &GlobalOpts, level: u8, message: impl FnOnce() -> String) {
    if global.verbose >= level {
        eprintln!("fcguard: {}", message());
    }
}

pub fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    match cli.command {
        Command::Hash { paths } => cmd_hash(g, &paths),
        Command::Index(IndexCommand::Build { hashes }) => cmd_index_build(g, &hashes),
        Command::Index(IndexCommand::Query { index, hash }) => cmd_index_query(g, &index, &hash),
        Command::Bundle(BundleCommand::Build {
            factchecks,
            bundle_version,
            key_file,
            created_at,
            include_all,
            allow_empty,
        }) => cmd_bundle_build(
            g,
            &factchecks,
            bundle_version,
            &key_file,
            created_at.as_deref(),
            BundleOptions {
                include_all,
                allow_empty,
            },
        ),
        Command::Bundle(BundleCommand::Verify { bundle, key_file }) => cmd_bundle_verify(&bundle, &key_file),
        Command::Bundle(BundleCommand::Apply {
            bundle,
            key_file,
            device,
        }) => cmd_bundle_apply(g, &bundle, &key_file, &device),
        Command::Simulate {
            script,
            key_file,
            no_telemetry,
        } => cmd_simulate(g, &script, key_file, !no_telemetry),
        Command::Analyze {
            shares,
            checks,
            cdf_prefix,
            cross_check,
        } => cmd_analyze(g, &shares, &checks, cdf_prefix.as_deref(), cross_check.as_deref()),
    }
}

fn cmd_hash(g: &GlobalOpts, paths: &[PathBuf]) -> CmdResult {
    let mut out = String::new();
    let mut failed = 0;
    for path in paths {
        match pnm::load(path) {
            Ok(img) => {
                let h = pdq::hash(&img);
                writeln!(out, "{} {} {}", h.bits, h.quality, path.display()).expect("writing to a String");
            }
            Err(e) => {
                eprintln!("fcguard: {}: {e}", path.display());
                failed += 1;
            }
        }
    }
    emit(g, out.as_bytes())?;
    if failed > 0 {
        return Err(Failure::io(format!("{failed} of {} inputs failed", paths.len())));
    }
    Ok(())
}

fn parse_hash_list(text: &str) -> Result<Vec<(u64, HashBits)>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Failure::io(format!("hash list line {}: {what}", i + 1));
        let mut fields = line.split_whitespace();
        let (Some(id), Some(hex), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad("expected `<id> <hex>`"));
        };
        let id = id.parse().map_err(|_| bad("id is not an unsigned integer"))?;
        let bits = HashBits::from_hex(hex).map_err(|e| bad(&e.to_string()))?;
        out.push((id, bits));
    }
    Ok(out)
}

fn cmd_index_build(g: &GlobalOpts, hashes: &Path) -> CmdResult {
    let Some(out) = &g.out else {
        return Err(Failure::usage("index build writes a binary file; pass --out"));
    };
    let text = String::from_utf8(read(hashes)?).map_err(|_| Failure::io("hash list is not UTF-8"))?;
    let index = MihIndex::build(parse_hash_list(&text)?).map_err(|e| Failure::io(e.to_string()))?;
    write_file(out, &index.to_bytes())?;
    note(g, 1, || format!("indexed {} fingerprints", index.len()));
    Ok(())
}

fn cmd_index_query(g: &GlobalOpts, index: &Path, hash: &str) -> CmdResult {
    let q = HashBits::from_hex(hash).map_err(|e| Failure::usage(format!("query hash: {e}")))?;
    let index = MihIndex::from_bytes(&read(index)?).map_err(|e| Failure::io(e.to_string()))?;
    let matches = if g.linear {
        index.linear_scan(&q, g.radius)
    } else {
        index.query(&q, g.radius).map_err(|e| Failure::usage(e.to_string()))?
    };
    let mut out = String::new();
    for m in matches {
        writeln!(out, "{} {}", m.id, m.distance).expect("writing to a String");
    }
    emit(g, out.as_bytes())
}

fn cmd_bundle_build(
    g: &GlobalOpts,
    factchecks: &Path,
    version: u64,
    key_file: &Path,
    created_at: Option<&str>,
    options: BundleOptions,
) -> CmdResult {
    let key = read_key(key_file)?;
    let report = ingest_factchecks_file(factchecks, timestamp::now()).map_err(|e| Failure::io(e.to_string()))?;
    for e in &report.errors {
        eprintln!("fcguard: {} line {}: {}", factchecks.display(), e.line, e.message);
    }
    let created_at = match created_at {
        Some(text) => timestamp::parse(text).map_err(|e| Failure::usage(e.to_string()))?,
        None => {
            let shipped: Vec<_> = if options.include_all {
                report.records.iter().collect()
            } else {
                bundle_eligible(&report.records).collect()
            };
            shipped
                .iter()
                .map(|r| r.check_date)
                .max()
                .unwrap_or(EARLIEST_CHECK_DATE)
        }
    };
    let bundle =
        build_bundle(&report.records, version, created_at, &key, options).map_err(|e| Failure::io(e.to_string()))?;
    emit(g, &bundle.to_json())?;
    note(g, 1, || {
        format!(
            "bundle v{} with {} of {} records",
            bundle.version,
            bundle.records.len(),
            report.records.len()
        )
    });
    if !report.errors.is_empty() {
        return Err(Failure::io(format!("{} rows skipped", report.errors.len())));
    }
    Ok(())
}

fn load_verified(bundle: &Path, key: &MacKey) -> Result<UpdateBundle, String> {
    let bytes = fs::read(bundle).map_err(|e| format!("{}: {e}", bundle.display()))?;
    let b = UpdateBundle::from_json(&bytes).map_err(|e| e.to_string())?;
    b.verify(key).map_err(|e| e.to_string())?;
    Ok(b)
}

fn cmd_bundle_verify(bundle: &Path, key_file: &Path) -> CmdResult {
    let key = read_key(key_file)?;
    if !bundle.exists() {
        return Err(Failure::io(format!("{}: no such file", bundle.display())));
    }
    match load_verified(bundle, &key) {
        Ok(_) => {
            println!("OK");
            Ok(())
        }
        Err(reason) => {
            println!("FAIL: {reason}");
            Err(Failure::verify(""))
        }
    }
}

fn cmd_bundle_apply(g: &GlobalOpts, bundle: &Path, key_file: &Path, device: &Path) -> CmdResult {
    let key = read_key(key_file)?;
    let current = if device.exists() {
        DeviceFingerprintSet::from_json(&read(device)?)
            .map_err(|e| Failure::io(format!("{}: {e}", device.display())))?
    } else {
        DeviceFingerprintSet::empty()
    };
    let b = load_verified(bundle, &key).map_err(|e| Failure::verify(format!("bundle rejected: {e}")))?;
    let next = current
        .apply_bundle(&b, &key)
        .map_err(|e| Failure::verify(format!("bundle rejected: {e}")))?;
    let target = g.out.as_deref().unwrap_or(device);
    write_file(target, &next.to_json())?;
    println!("applied version {} ({} records)", next.version(), next.len());
    Ok(())
}

fn cmd_simulate(g: &GlobalOpts, script_path: &Path, key_file: Option<PathBuf>, telemetry: bool) -> CmdResult {
    let base = script_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let key_file = key_file.unwrap_or_else(|| base.join("bundle.key"));
    let key = read_key(&key_file)?;
    let text = String::from_utf8(read(script_path)?).map_err(|_| Failure::io("script is not UTF-8"))?;
    let script = SimScript::parse(&text).map_err(|e| Failure::io(format!("{}: {e}", script_path.display())))?;
    let config = SimConfig {
        seed: g.seed,
        policy: g.policy,
        radius: g.radius,
        telemetry,
        bundle_key: key,
    };
    let report = run_scenario(&script, &FsAssets { base }, &config).map_err(|e| Failure::io(e.to_string()))?;
    emit(g, &report.to_json())?;
    note(g, 1, || {
        format!(
            "{} events, {} decisions, {} relayed, {} prevented",
            script.len(),
            report.decisions.len(),
            report.server_trace.len(),
            report.prevented_total
        )
    });
    Ok(())
}

fn cmd_analyze(
    g: &GlobalOpts,
    shares: &Path,
    checks: &Path,
    cdf_prefix: Option<&str>,
    cross_check: Option<&Path>,
) -> CmdResult {
    let events = analysis::read_share_log(read(shares)?.as_slice()).map_err(|e| Failure::io(e.to_string()))?;
    let entries = analysis::read_checks(read(checks)?.as_slice()).map_err(|e| Failure::io(e.to_string()))?;
    let (summaries, unknown) = analysis::summarize(&events, &analysis::first_check_dates(&entries));
    if !unknown.is_empty() {
        eprintln!(
            "fcguard: skipped {} share events for images without a check date (first: image {})",
            unknown.len(),
            unknown[0].image_id
        );
    }
    let (kept, report) = match g.exclude_over {
        Some(limit) => analysis::exclude_outliers(&summaries, limit).map_err(|e| Failure::usage(e.to_string()))?,
        None => (summaries.clone(), analysis::aggregate(&summaries)),
    };
    emit(g, &report.to_json())?;
    if let Some(prefix) = cdf_prefix {
        let series = analysis::cdf_series(&kept);
        write_file(
            Path::new(&format!("{prefix}before.tsv")),
            CdfSeries::to_tsv(&series.before).as_bytes(),
        )?;
        write_file(
            Path::new(&format!("{prefix}after.tsv")),
            CdfSeries::to_tsv(&series.after).as_bytes(),
        )?;
    }
    if let Some(path) = cross_check {
        let sim: SimReport =
            serde_json::from_slice(&read(path)?).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
        let check = analysis::cross_check_simulation(&sim, &summaries).map_err(|e| Failure::verify(e.to_string()))?;
        if !check.consistent {
            let ids: Vec<String> = check.mismatched.iter().map(|m| m.image_id.to_string()).collect();
            return Err(Failure::verify(format!(
                "simulation prevented {} shares but {} happened after checks; differing images: {}",
                check.prevented_total,
                check.shares_after_total,
                ids.join(",")
            )));
        }
        note(g, 1, || {
            format!("cross-check consistent: {} prevented", check.prevented_total)
        });
    }
    Ok(())
}
