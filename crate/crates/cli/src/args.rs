use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fcguard::match_index::{DEFAULT_RADIUS, MAX_RADIUS};
use fcguard::pipeline::FlagPolicy;

/// On-device fact-check fingerprinting tools.
///
/// Images are read as binary PGM/PPM or as raw 8-bit luma (`.raw`/`.luma`: little-endian
/// u64 width and height, then the pixels). Convert other formats first, e.g.
/// `convert photo.jpg -depth 8 photo.ppm`.
#[derive(Debug, Parser)]
#[command(name = "fcguard", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Match radius in bits (0 to 31).
    #[arg(long, global = true, default_value_t = DEFAULT_RADIUS,
          value_parser = clap::value_parser!(u32).range(0..=MAX_RADIUS as i64))]
    pub radius: u32,

    /// Seed for session keys and generated data.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Action taken on a fingerprint match.
    #[arg(long, global = true, default_value = "warn_only", value_parser = parse_policy)]
    pub policy: FlagPolicy,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Drop images with more total shares than this before aggregating.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub exclude_over: Option<u64>,

    /// Use an exhaustive scan instead of the multi-index.
    #[arg(long, global = true)]
    pub linear: bool,

    /// More diagnostics on standard error; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_policy(s: &str) -> Result<FlagPolicy, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print `<hex> <quality> <path>` for each image.
    Hash {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Build or query a multi-index over fingerprints.
    #[command(subcommand)]
    Index(IndexCommand),
    /// Build, verify or apply signed fingerprint bundles.
    #[command(subcommand)]
    Bundle(BundleCommand),
    /// Run a scenario script and write the report.
    Simulate {
        script: PathBuf,
        /// Hex-encoded bundle key; defaults to `bundle.key` beside the script.
        #[arg(long)]
        key_file: Option<PathBuf>,
        /// Clients do not report match counts.
        #[arg(long)]
        no_telemetry: bool,
    },
    /// Before/after fact-check share statistics.
    Analyze {
        /// CSV `image_id,group_id,timestamp`.
        #[arg(long)]
        shares: PathBuf,
        /// CSV `image_id,check_date,agency,url`.
        #[arg(long)]
        checks: PathBuf,
        /// Write `<PREFIX>before.tsv` and `<PREFIX>after.tsv` CDF series.
        #[arg(long)]
        cdf_prefix: Option<String>,
        /// Compare with a simulation report of the same shares under block_forward.
        #[arg(long)]
        cross_check: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum IndexCommand {
    /// Read `<id> <hex>` lines and write a binary index to --out.
    Build { hashes: PathBuf },
    /// Print `<id> <distance>` for entries within --radius.
    Query {
        #[arg(long)]
        index: PathBuf,
        hash: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum BundleCommand {
    /// Hash a fact-check listing and write a signed bundle to --out.
    Build {
        /// CSV `id,image_path,verdict,check_date,agency,url`.
        #[arg(long)]
        factchecks: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        bundle_version: u64,
        #[arg(long)]
        key_file: PathBuf,
        /// Defaults to the latest check date among bundled records.
        #[arg(long)]
        created_at: Option<String>,
        /// Ship every verdict, not only misinformation.
        #[arg(long)]
        include_all: bool,
        #[arg(long)]
        allow_empty: bool,
    },
    /// Print OK or FAIL for a bundle.
    Verify {
        bundle: PathBuf,
        #[arg(long)]
        key_file: PathBuf,
    },
    /// Merge a bundle into a device file (created if missing).
    Apply {
        bundle: PathBuf,
        #[arg(long)]
        key_file: PathBuf,
        #[arg(long)]
        device: PathBuf,
    },
}
