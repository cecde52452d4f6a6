//! Scenario generators: replaying a share log under the fingerprinting
//! architecture, and random message traffic for property checks.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::script::{ScriptEvent, SimScript, ALL_CLIENTS};
use super::sim::MemoryAssets;
use crate::analysis::ShareEvent;
use crate::fingerprint_store::{build_bundle, BundleError, BundleOptions, FingerprintRecord, MacKey, Verdict};
use crate::pdq::{self, pnm};
use crate::synth::smooth_texture;
use crate::timestamp::UnixSeconds;

const IMAGE_SIDE: usize = 64;

/// A script together with everything it references.
#[derive(Clone, Debug)]
pub struct GeneratedScenario {
    pub script: SimScript,
    pub assets: MemoryAssets,
    pub bundle_key: MacKey,
    /// Every fingerprint record shipped in the scenario's bundles.
    pub records: Vec<FingerprintRecord>,
}

impl GeneratedScenario {
    /// Writes `script.jsonl`, `bundle.key` (hex) and every asset under
    /// `dir`; returns the script path.
    pub fn write_to(&self, dir: &Path) -> io::Result<PathBuf> {
        for (name, bytes) in &self.assets.0 {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        std::fs::write(dir.join("bundle.key"), hex::encode(self.bundle_key.as_bytes()) + "\n")?;
        let script = dir.join("script.jsonl");
        std::fs::write(&script, self.script.to_jsonl())?;
        Ok(script)
    }
}

pub fn scenario_key(seed: u64) -> MacKey {
    let mut h = Sha256::new();
    h.update(b"fcguard scenario bundle key");
    h.update(seed.to_le_bytes());
    MacKey::new(h.finalize().to_vec())
}

fn image_seed(seed: u64, image_id: u64) -> u64 {
    seed.rotate_left(17) ^ image_id.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Builds the script that replays `events` with fingerprint bundles landing
/// on every device at each image's check date. Each group gets a poster and
/// one reader; shares are group sends by the poster. At equal timestamps
/// bundles apply before sends, so a share at the check date is stoppable.
/// Events for images without a check date are skipped.
pub fn scenario_from_shares(
    events: &[ShareEvent],
    checks: &BTreeMap<u64, UnixSeconds>,
    seed: u64,
) -> Result<GeneratedScenario, BundleError> {
    let key = scenario_key(seed);
    let known: Vec<&ShareEvent> = events.iter().filter(|e| checks.contains_key(&e.image_id)).collect();
    let images: BTreeSet<u64> = known.iter().map(|e| e.image_id).collect();
    let groups: BTreeSet<&str> = known.iter().map(|e| e.group_id.as_str()).collect();

    let mut assets = MemoryAssets::default();
    let mut by_date: BTreeMap<UnixSeconds, Vec<FingerprintRecord>> = BTreeMap::new();
    let mut records = Vec::new();
    for &id in &images {
        let img = smooth_texture(image_seed(seed, id), IMAGE_SIDE, IMAGE_SIDE);
        let record = FingerprintRecord {
            id,
            hash: pdq::hash(&img).bits,
            verdict: Verdict::Misinformation,
            check_date: checks[&id],
            agency: "factcheck".into(),
            url: format!("https://factcheck.example/{id}"),
        };
        assets.insert(format!("img/{id}.ppm"), pnm::encode_pnm(&img));
        by_date.entry(record.check_date).or_default().push(record.clone());
        records.push(record);
    }

    // (t, priority, event): joins, then bundles, then shares.
    let mut timeline: Vec<(UnixSeconds, u8, ScriptEvent)> = Vec::new();
    let start = known
        .iter()
        .map(|e| e.timestamp)
        .chain(by_date.keys().copied())
        .min()
        .unwrap_or(0);
    for g in &groups {
        timeline.push((start, 0, ScriptEvent::join(start, &format!("poster-{g}"), g)));
        timeline.push((start, 0, ScriptEvent::join(start, &format!("reader-{g}"), g)));
    }
    for (version, (date, recs)) in by_date.iter().enumerate() {
        let version = version as u64 + 1;
        let bundle = build_bundle(recs, version, *date, &key, BundleOptions::default())?;
        let path = format!("bundles/v{version}.json");
        assets.insert(path.clone(), bundle.to_json());
        timeline.push((*date, 1, ScriptEvent::apply_bundle(*date, ALL_CLIENTS, &path)));
    }
    for e in &known {
        let poster = format!("poster-{}", e.group_id);
        let image = format!("img/{}.ppm", e.image_id);
        timeline.push((
            e.timestamp,
            2,
            ScriptEvent::send_group(e.timestamp, &poster, &e.group_id, &image),
        ));
    }
    timeline.sort_by_key(|(t, priority, _)| (*t, *priority));
    let script = SimScript {
        events: timeline.into_iter().map(|(_, _, e)| e).collect(),
    }
    .renumbered();
    Ok(GeneratedScenario {
        script,
        assets,
        bundle_key: key,
        records,
    })
}

/// Random share log over `images` images and `groups` groups, with check
/// dates inside the window so that both before and after shares occur.
pub fn random_share_log(
    seed: u64,
    images: u64,
    groups: u64,
    shares: usize,
) -> (Vec<ShareEvent>, BTreeMap<u64, UnixSeconds>) {
    const WINDOW_START: UnixSeconds = 1_535_760_000; // 2018-09-01
    const WINDOW_DAYS: i64 = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks: BTreeMap<u64, UnixSeconds> = (1..=images)
        .map(|id| {
            let day = rng.random_range(5..WINDOW_DAYS - 5);
            (id, WINDOW_START + day * 86_400)
        })
        .collect();
    let mut events: Vec<ShareEvent> = (0..shares)
        .map(|_| {
            let image_id = rng.random_range(1..=images);
            // Some shares land exactly on the check instant.
            let timestamp = if rng.random_bool(0.05) {
                checks[&image_id]
            } else {
                WINDOW_START + rng.random_range(0..WINDOW_DAYS * 86_400)
            };
            ShareEvent {
                image_id,
                group_id: format!("grp{}", rng.random_range(0..groups)),
                timestamp,
            }
        })
        .collect();
    events.sort_by_key(|e| e.timestamp);
    (events, checks)
}

/// `n_events` events of random traffic among 12 clients and 3 groups:
/// joins, direct and group sends of 16 images (8 of them debunked across 3
/// bundles), and bundle applications, some of them stale.
pub fn random_scenario(seed: u64, n_events: usize) -> GeneratedScenario {
    const START: UnixSeconds = 1_560_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = scenario_key(seed);
    let clients: Vec<String> = (0..12).map(|i| format!("c{i:02}")).collect();
    let groups = ["g0", "g1", "g2"];
    let mut assets = MemoryAssets::default();
    let mut records = Vec::new();
    let image_paths: Vec<String> = (0..16u64).map(|i| format!("img{i}.ppm")).collect();
    for (i, path) in image_paths.iter().enumerate() {
        let w = 48 + 16 * (i % 3);
        let img = smooth_texture(image_seed(seed, i as u64), w, 48);
        if i < 8 {
            records.push(FingerprintRecord {
                id: 1000 + i as u64,
                hash: pdq::hash(&img).bits,
                verdict: Verdict::Misinformation,
                check_date: START,
                agency: "factcheck".into(),
                url: format!("https://factcheck.example/{i}"),
            });
        }
        assets.insert(path.clone(), pnm::encode_pnm(&img));
    }
    let bundle_paths: Vec<String> = [0..3, 3..6, 6..8]
        .into_iter()
        .enumerate()
        .map(|(v, range)| {
            let bundle = build_bundle(&records[range], v as u64 + 1, START, &key, BundleOptions::default())
                .expect("generated records are valid");
            let path = format!("bundle_v{}.json", v + 1);
            assets.insert(path.clone(), bundle.to_json());
            path
        })
        .collect();

    let mut events = Vec::with_capacity(n_events);
    let mut t = START;
    'joins: for g in groups {
        for c in clients.choose_multiple(&mut rng, 4) {
            if events.len() == n_events {
                break 'joins;
            }
            events.push(ScriptEvent::join(t, c, g));
        }
    }
    while events.len() < n_events {
        t += rng.random_range(0..60);
        let actor = clients.choose(&mut rng).expect("clients");
        let roll = rng.random_range(0..100);
        let event = if roll < 8 {
            let target = if rng.random_bool(0.3) {
                ALL_CLIENTS
            } else {
                actor.as_str()
            };
            ScriptEvent::apply_bundle(t, target, bundle_paths.choose(&mut rng).expect("bundles"))
        } else {
            let image = image_paths.choose(&mut rng).expect("images");
            if roll < 75 {
                let mut peer = clients.choose(&mut rng).expect("clients");
                while peer == actor {
                    peer = clients.choose(&mut rng).expect("clients");
                }
                ScriptEvent::send(t, actor, peer, image)
            } else {
                ScriptEvent::send_group(t, actor, groups.choose(&mut rng).expect("groups"), image)
            }
        };
        events.push(event);
    }
    GeneratedScenario {
        script: SimScript { events }.renumbered(),
        assets,
        bundle_key: key,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{cross_check_simulation, summarize};
    use crate::pipeline::{run_scenario, FlagPolicy, SimConfig};

    fn config(s: &GeneratedScenario, policy: FlagPolicy) -> SimConfig {
        SimConfig {
            policy,
            ..SimConfig::new(s.bundle_key.clone())
        }
    }

    #[test]
    fn share_replay_agrees_with_analysis() {
        for seed in 0..5 {
            let (events, checks) = random_share_log(seed, 6, 4, 80);
            let scenario = scenario_from_shares(&events, &checks, seed).unwrap();
            let report = run_scenario(
                &scenario.script,
                &scenario.assets,
                &config(&scenario, FlagPolicy::BlockForward),
            )
            .unwrap();
            let (summaries, unknown) = summarize(&events, &checks);
            assert!(unknown.is_empty());
            let check = cross_check_simulation(&report, &summaries).unwrap();
            assert!(check.consistent, "seed {seed}: {check:?}");
            assert!(check.prevented_total > 0);
        }
    }

    #[test]
    fn boundary_perturbation_is_detected() {
        let (mut events, checks) = random_share_log(9, 5, 3, 60);
        let scenario = scenario_from_shares(&events, &checks, 9).unwrap();
        let report = run_scenario(
            &scenario.script,
            &scenario.assets,
            &config(&scenario, FlagPolicy::BlockForward),
        )
        .unwrap();
        // Move one after-share to just before its check date, in the analysis input only.
        let victim = events.iter().position(|e| e.timestamp >= checks[&e.image_id]).unwrap();
        let image = events[victim].image_id;
        events[victim].timestamp = checks[&image] - 1;
        let (summaries, _) = summarize(&events, &checks);
        let check = cross_check_simulation(&report, &summaries).unwrap();
        assert!(!check.consistent);
        assert_eq!(check.mismatched.len(), 1);
        assert_eq!(check.mismatched[0].image_id, image);
    }

    #[test]
    fn foreign_ids_are_a_configuration_error() {
        let (events, checks) = random_share_log(4, 3, 2, 30);
        let scenario = scenario_from_shares(&events, &checks, 4).unwrap();
        let report = run_scenario(
            &scenario.script,
            &scenario.assets,
            &config(&scenario, FlagPolicy::BlockForward),
        )
        .unwrap();
        assert!(cross_check_simulation(&report, &[]).is_err());
    }

    #[test]
    fn random_scenario_has_requested_size_and_runs() {
        let s = random_scenario(1, 300);
        assert_eq!(s.script.len(), 300);
        let text = s.script.to_jsonl();
        assert_eq!(SimScript::parse(&text).unwrap(), s.script);
        let report = run_scenario(&s.script, &s.assets, &config(&s, FlagPolicy::WarnOnly)).unwrap();
        assert!(!report.server_trace.is_empty());
        assert!(report.decisions.iter().any(|d| d.decision.record_id.is_some()));
        assert!(
            report.bundles.iter().any(|b| b.status.contains("stale")),
            "{:?}",
            report.bundles
        );
    }

    #[test]
    fn written_scenario_reloads() {
        let s = random_scenario(2, 40);
        let dir = tempfile::tempdir().unwrap();
        let script_path = s.write_to(dir.path()).unwrap();
        let text = std::fs::read_to_string(&script_path).unwrap();
        assert_eq!(SimScript::parse(&text).unwrap(), s.script);
        assert!(dir.path().join("bundle_v1.json").exists());
        let fs_assets = crate::pipeline::FsAssets {
            base: dir.path().to_path_buf(),
        };
        let a = run_scenario(&s.script, &fs_assets, &config(&s, FlagPolicy::Allow)).unwrap();
        let b = run_scenario(&s.script, &s.assets, &config(&s, FlagPolicy::Allow)).unwrap();
        assert_eq!(a, b);
    }
}
