use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cipher::{hmac, ChaChaHmac, SessionKey};
use super::client::{
    Client, ClientId, Envelope, FlagDecision, FlagPolicy, MatchCounter, Outcome, PipelineError, Relay, TraceRow,
};
use super::script::{EventKind, ScriptError, SimScript, Target, ALL_CLIENTS};
use crate::fingerprint_store::{MacKey, UpdateBundle};
use crate::match_index::DEFAULT_RADIUS;
use crate::pdq::{pnm, RasterImage};
use crate::timestamp::UnixSeconds;

/// Where scripts find images and bundles.
pub trait AssetSource {
    fn read(&self, path: &str) -> Result<Vec<u8>, String>;
}

/// Paths relative to a base directory, usually the script's.
#[derive(Clone, Debug)]
pub struct FsAssets {
    pub base: PathBuf,
}

impl AssetSource for FsAssets {
    fn read(&self, path: &str) -> Result<Vec<u8>, String> {
        std::fs::read(self.base.join(path)).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct MemoryAssets(pub BTreeMap<String, Vec<u8>>);

impl MemoryAssets {
    pub fn insert(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        self.0.insert(path.into(), bytes);
    }
}

impl AssetSource for MemoryAssets {
    fn read(&self, path: &str) -> Result<Vec<u8>, String> {
        self.0.get(path).cloned().ok_or_else(|| "no such asset".to_string())
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    /// Derives every pairwise session key.
    pub seed: u64,
    pub policy: FlagPolicy,
    pub radius: u32,
    /// Whether clients opt in to match-count telemetry.
    pub telemetry: bool,
    pub bundle_key: MacKey,
}

impl SimConfig {
    pub fn new(bundle_key: MacKey) -> Self {
        SimConfig {
            seed: 0,
            policy: FlagPolicy::default(),
            radius: DEFAULT_RADIUS,
            telemetry: true,
            bundle_key,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("script line {line}: cannot load {path}: {message}")]
    Asset { line: usize, path: String, message: String },
    #[error("script line {line}: {source}")]
    Pipeline { line: usize, source: PipelineError },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub line: usize,
    pub t: UnixSeconds,
    /// The deciding device.
    pub client: ClientId,
    /// Recipient at send, sender at receive; absent for group sends.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peer: Option<ClientId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(flatten)]
    pub decision: FlagDecision,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleRow {
    pub line: usize,
    pub t: UnixSeconds,
    pub client: ClientId,
    pub version: u64,
    /// `applied`, or the rejection reason.
    pub status: String,
}

/// Outcome of a scenario run; a pure function of the script, the assets and
/// the config.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub decisions: Vec<DecisionRow>,
    pub server_trace: Vec<TraceRow>,
    pub counters: MatchCounter,
    /// Sends stopped by a `Blocked` decision.
    pub prevented_total: u64,
    pub bundles: Vec<BundleRow>,
}

impl SimReport {
    /// Pretty JSON, newline-terminated.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn send_decisions(&self) -> impl Iterator<Item = &DecisionRow> {
        self.decisions
            .iter()
            .filter(|d| d.decision.stage == super::client::Stage::Send)
    }
}

/// Pre-provisioned pairwise key; symmetric in the two ids.
pub fn derive_session_key(seed: u64, a: &str, b: &str) -> SessionKey {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut master = b"fcguard session".to_vec();
    master.extend_from_slice(&seed.to_le_bytes());
    SessionKey(hmac(&master, &[lo.as_bytes(), &[0], hi.as_bytes()]))
}

fn participants(script: &SimScript) -> BTreeSet<ClientId> {
    let mut out = BTreeSet::new();
    for e in &script.events {
        if e.actor != ALL_CLIENTS {
            out.insert(e.actor.clone());
        }
        if let EventKind::Send {
            target: Target::Client(r),
            ..
        } = &e.kind
        {
            out.insert(r.clone());
        }
    }
    out
}

struct Sim<'a> {
    config: &'a SimConfig,
    assets: &'a dyn AssetSource,
    observer: &'a mut dyn FnMut(&Envelope),
    cipher: ChaChaHmac,
    clients: BTreeMap<ClientId, Client>,
    groups: BTreeMap<String, BTreeSet<ClientId>>,
    relay: Relay,
    images: HashMap<String, Rc<RasterImage>>,
    bundles: HashMap<String, Rc<UpdateBundle>>,
    report: SimReport,
}

impl Sim<'_> {
    fn asset(&self, line: usize, path: &str) -> Result<Vec<u8>, SimError> {
        self.assets.read(path).map_err(|message| SimError::Asset {
            line,
            path: path.into(),
            message,
        })
    }

    fn image(&mut self, line: usize, path: &str) -> Result<Rc<RasterImage>, SimError> {
        if let Some(img) = self.images.get(path) {
            return Ok(Rc::clone(img));
        }
        let bytes = self.asset(line, path)?;
        let format = pnm::RasterFormat::from_path(path.as_ref());
        let img = Rc::new(pnm::decode(&bytes, format).map_err(|e| SimError::Asset {
            line,
            path: path.into(),
            message: e.to_string(),
        })?);
        self.images.insert(path.into(), Rc::clone(&img));
        Ok(img)
    }

    fn bundle(&mut self, line: usize, path: &str) -> Result<Rc<UpdateBundle>, SimError> {
        if let Some(b) = self.bundles.get(path) {
            return Ok(Rc::clone(b));
        }
        let bytes = self.asset(line, path)?;
        let b = Rc::new(UpdateBundle::from_json(&bytes).map_err(|e| SimError::Asset {
            line,
            path: path.into(),
            message: e.to_string(),
        })?);
        self.bundles.insert(path.into(), Rc::clone(&b));
        Ok(b)
    }

    fn ensure_session(&mut self, a: &str, b: &str) {
        if self.clients[a].has_session(b) {
            return;
        }
        let key = derive_session_key(self.config.seed, a, b);
        self.clients
            .get_mut(a)
            .expect("participant")
            .establish_session(b, key.clone());
        self.clients.get_mut(b).expect("participant").establish_session(a, key);
    }

    fn apply(&mut self, line: usize, t: UnixSeconds, actor: &str, path: &str) -> Result<(), SimError> {
        let bundle = self.bundle(line, path)?;
        let targets: Vec<ClientId> = if actor == ALL_CLIENTS {
            self.clients.keys().cloned().collect()
        } else {
            vec![actor.to_string()]
        };
        for id in targets {
            let client = self.clients.get_mut(&id).expect("participant");
            let status = match client.apply_bundle(&bundle, &self.config.bundle_key) {
                Ok(_) => "applied".to_string(),
                Err(e) => e.to_string(),
            };
            self.report.bundles.push(BundleRow {
                line,
                t,
                client: id,
                version: bundle.version,
                status,
            });
        }
        Ok(())
    }

    fn send(
        &mut self,
        line: usize,
        t: UnixSeconds,
        actor: &str,
        target: &Target,
        image_path: &str,
    ) -> Result<(), SimError> {
        let img = self.image(line, image_path)?;
        let (recipients, peer, group): (Vec<ClientId>, _, _) = match target {
            Target::Client(r) => (vec![r.clone()], Some(r.clone()), None),
            Target::Group(g) => {
                let members = self.groups.get(g).cloned().unwrap_or_default();
                (
                    members.into_iter().filter(|m| m != actor).collect(),
                    None,
                    Some(g.clone()),
                )
            }
        };
        for r in &recipients {
            self.ensure_session(actor, r);
        }
        let pipeline = |source| SimError::Pipeline { line, source };
        let sender = self.clients.get_mut(actor).expect("participant");
        let refs: Vec<&str> = recipients.iter().map(String::as_str).collect();
        let (decision, envelopes) = sender.send_to_many(&refs, &img, &self.cipher).map_err(pipeline)?;
        sender.report_match(&decision, &mut self.report.counters);
        if decision.outcome == Outcome::Blocked {
            self.report.prevented_total += 1;
        }
        self.report.decisions.push(DecisionRow {
            line,
            t,
            client: actor.to_string(),
            peer,
            group: group.clone(),
            decision,
        });
        for env in envelopes {
            let recipient = env.recipient.clone();
            (self.observer)(&env);
            self.relay.relay(env, t);
            for delivered in self.relay.drain(&recipient) {
                let receiver = self.clients.get_mut(&recipient).expect("participant");
                let (_, decision) = receiver.receive_image(&delivered, &self.cipher).map_err(pipeline)?;
                self.report.decisions.push(DecisionRow {
                    line,
                    t,
                    client: recipient.clone(),
                    peer: Some(delivered.sender.clone()),
                    group: group.clone(),
                    decision,
                });
            }
        }
        Ok(())
    }
}

/// Runs the script on a single-threaded event loop. Every client named in
/// the script exists from the start with an empty fingerprint set; session
/// keys derive from `config.seed`. Rejected bundles are reported, not fatal.
pub fn run_scenario(script: &SimScript, assets: &dyn AssetSource, config: &SimConfig) -> Result<SimReport, SimError> {
    run_scenario_observed(script, assets, config, &mut |_| {})
}

/// [`run_scenario`], passing every envelope to `observer` as the relay
/// receives it.
pub fn run_scenario_observed(
    script: &SimScript,
    assets: &dyn AssetSource,
    config: &SimConfig,
    observer: &mut dyn FnMut(&Envelope),
) -> Result<SimReport, SimError> {
    let mut sim = Sim {
        config,
        assets,
        observer,
        cipher: ChaChaHmac,
        clients: BTreeMap::new(),
        groups: BTreeMap::new(),
        relay: Relay::new(),
        images: HashMap::new(),
        bundles: HashMap::new(),
        report: SimReport::default(),
    };
    for id in participants(script) {
        sim.relay.register(id.clone());
        let client = Client::new(id.clone(), config.policy)
            .with_radius(config.radius)
            .with_telemetry(config.telemetry);
        sim.clients.insert(id, client);
    }
    for e in &script.events {
        match &e.kind {
            EventKind::Join { group } => {
                sim.groups.entry(group.clone()).or_default().insert(e.actor.clone());
            }
            EventKind::ApplyBundle { bundle_path } => sim.apply(e.line, e.t, &e.actor, bundle_path)?,
            EventKind::Send { target, image_path } => sim.send(e.line, e.t, &e.actor, target, image_path)?,
        }
    }
    sim.report.server_trace = sim.relay.trace().to_vec();
    Ok(sim.report)
}
