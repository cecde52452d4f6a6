use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cipher::{hmac, AuthError, CipherSuite, SessionKey};
use crate::fingerprint_store::{ApplyError, DeviceFingerprintSet, FactCheckMatch, MacKey, UpdateBundle};
use crate::match_index::{IndexError, DEFAULT_RADIUS};
use crate::pdq::{self, pnm, RasterImage};
use crate::timestamp::UnixSeconds;

pub type ClientId = String;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("no session between {client} and {peer}")]
    NoSession { client: ClientId, peer: ClientId },
    #[error("envelope for {recipient} delivered to {client}")]
    Misaddressed { client: ClientId, recipient: ClientId },
    #[error("envelope from {sender} seq {seq} failed authentication")]
    Tamper { sender: ClientId, seq: u64 },
    #[error("decrypted payload is not an image: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagPolicy {
    /// Matches are recorded but never acted on.
    Allow,
    /// Matched content is delivered with a warning.
    #[default]
    WarnOnly,
    /// Matched content is not sent; on receipt it is marked non-forwardable.
    BlockForward,
}

impl FlagPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagPolicy::Allow => "allow",
            FlagPolicy::WarnOnly => "warn_only",
            FlagPolicy::BlockForward => "block_forward",
        }
    }
}

impl fmt::Display for FlagPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlagPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "allow" => Ok(FlagPolicy::Allow),
            "warn_only" | "warnonly" | "warn" => Ok(FlagPolicy::WarnOnly),
            "block_forward" | "blockforward" | "block" => Ok(FlagPolicy::BlockForward),
            _ => Err(format!(
                "unknown policy {s:?}; expected allow, warn_only or block_forward"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Clean,
    Warned,
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Send,
    Receive,
}

/// Result of an on-device check. `Warned` and `Blocked` always carry the
/// matched record; `Clean` carries it only under [`FlagPolicy::Allow`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagDecision {
    pub stage: Stage,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<u32>,
    /// Where the content was fact-checked.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

impl FlagDecision {
    pub fn clean(stage: Stage) -> Self {
        FlagDecision {
            stage,
            outcome: Outcome::Clean,
            record_id: None,
            distance: None,
            url: None,
        }
    }

    fn from_match(stage: Stage, policy: FlagPolicy, m: FactCheckMatch) -> Self {
        let outcome = match policy {
            FlagPolicy::Allow => Outcome::Clean,
            FlagPolicy::WarnOnly => Outcome::Warned,
            FlagPolicy::BlockForward => Outcome::Blocked,
        };
        FlagDecision {
            stage,
            outcome,
            record_id: Some(m.record.id),
            distance: Some(m.distance),
            url: Some(m.record.url),
        }
    }

    pub fn matched(&self) -> bool {
        self.record_id.is_some()
    }
}

/// What travels through the relay. Only the ciphertext depends on content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Envelope {
    pub sender: ClientId,
    pub recipient: ClientId,
    pub seq: u64,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 32],
}

/// Aggregate match statistics: record id to occurrence count, nothing else.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatchCounter(BTreeMap<u64, u64>);

impl MatchCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_match(&mut self, record_id: u64) {
        *self.0.entry(record_id).or_insert(0) += 1;
    }

    pub fn count(&self, record_id: u64) -> u64 {
        self.0.get(&record_id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub peer: ClientId,
    pub seq: Option<u64>,
    pub decision: FlagDecision,
}

/// One messaging endpoint with its own fingerprint snapshot.
#[derive(Clone, Debug)]
pub struct Client {
    id: ClientId,
    sessions: BTreeMap<ClientId, SessionKey>,
    device: Arc<DeviceFingerprintSet>,
    policy: FlagPolicy,
    radius: u32,
    telemetry: bool,
    next_seq: u64,
    log: Vec<LogEntry>,
}

impl Client {
    pub fn new(id: impl Into<ClientId>, policy: FlagPolicy) -> Self {
        Client {
            id: id.into(),
            sessions: BTreeMap::new(),
            device: Arc::new(DeviceFingerprintSet::empty()),
            policy,
            radius: DEFAULT_RADIUS,
            telemetry: false,
            next_seq: 1,
            log: Vec::new(),
        }
    }

    pub fn with_radius(mut self, radius: u32) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_telemetry(mut self, enabled: bool) -> Self {
        self.telemetry = enabled;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn policy(&self) -> FlagPolicy {
        self.policy
    }

    pub fn telemetry_enabled(&self) -> bool {
        self.telemetry
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn establish_session(&mut self, peer: impl Into<ClientId>, key: SessionKey) {
        self.sessions.insert(peer.into(), key);
    }

    pub fn has_session(&self, peer: &str) -> bool {
        self.sessions.contains_key(peer)
    }

    pub fn snapshot(&self) -> Arc<DeviceFingerprintSet> {
        Arc::clone(&self.device)
    }

    pub fn set_snapshot(&mut self, device: Arc<DeviceFingerprintSet>) {
        self.device = device;
    }

    /// On failure the current snapshot stays in place.
    pub fn apply_bundle(&mut self, bundle: &UpdateBundle, key: &MacKey) -> Result<u64, ApplyError> {
        let next = self.device.apply_bundle(bundle, key)?;
        self.device = Arc::new(next);
        Ok(self.device.version())
    }

    /// Hash and look up `img` against this device's snapshot.
    pub fn check(&self, img: &RasterImage, stage: Stage) -> Result<FlagDecision, PipelineError> {
        let h = pdq::hash(img);
        Ok(match self.device.lookup(&h.bits, self.radius)? {
            Some(m) => FlagDecision::from_match(stage, self.policy, m),
            None => FlagDecision::clean(stage),
        })
    }

    /// Per-direction key so the two ends never share a nonce space.
    fn direction_key(&self, sender: &str, recipient: &str) -> Result<SessionKey, PipelineError> {
        let peer = if sender == self.id { recipient } else { sender };
        let session = self.sessions.get(peer).ok_or_else(|| PipelineError::NoSession {
            client: self.id.clone(),
            peer: peer.to_string(),
        })?;
        Ok(SessionKey(hmac(
            &session.0,
            &[sender.as_bytes(), &[0], recipient.as_bytes()],
        )))
    }

    /// Encrypts an already-checked payload for one recipient.
    pub fn seal(
        &mut self,
        recipient: &str,
        payload: &[u8],
        cipher: &impl CipherSuite,
    ) -> Result<Envelope, PipelineError> {
        let key = self.direction_key(&self.id, recipient)?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let sealed = cipher.encrypt(&key, seq, payload);
        Ok(Envelope {
            sender: self.id.clone(),
            recipient: recipient.to_string(),
            seq,
            ciphertext: sealed.ciphertext,
            tag: sealed.tag,
        })
    }

    /// Checks before encrypting. A `Blocked` decision produces no envelope.
    pub fn send_image(
        &mut self,
        recipient: &str,
        img: &RasterImage,
        cipher: &impl CipherSuite,
    ) -> Result<(FlagDecision, Option<Envelope>), PipelineError> {
        let (decision, mut envelopes) = self.send_to_many(&[recipient], img, cipher)?;
        Ok((decision, envelopes.pop()))
    }

    /// Group fan-out: one check, then one pairwise envelope per recipient.
    /// Fails before checking if any session is missing.
    pub fn send_to_many(
        &mut self,
        recipients: &[&str],
        img: &RasterImage,
        cipher: &impl CipherSuite,
    ) -> Result<(FlagDecision, Vec<Envelope>), PipelineError> {
        if let Some(missing) = recipients.iter().find(|r| !self.has_session(r)) {
            return Err(PipelineError::NoSession {
                client: self.id.clone(),
                peer: missing.to_string(),
            });
        }
        let decision = self.check(img, Stage::Send)?;
        let mut envelopes = Vec::new();
        if decision.outcome != Outcome::Blocked {
            let payload = pnm::encode_pnm(img);
            for r in recipients {
                envelopes.push(self.seal(r, &payload, cipher)?);
            }
        }
        for (i, r) in recipients.iter().enumerate() {
            self.log.push(LogEntry {
                peer: r.to_string(),
                seq: envelopes.get(i).map(|e| e.seq),
                decision: decision.clone(),
            });
        }
        Ok((decision, envelopes))
    }

    /// Authenticates, decrypts and re-checks on this device. `Blocked` here
    /// means delivered but not forwardable.
    pub fn receive_image(
        &mut self,
        envelope: &Envelope,
        cipher: &impl CipherSuite,
    ) -> Result<(RasterImage, FlagDecision), PipelineError> {
        if envelope.recipient != self.id {
            return Err(PipelineError::Misaddressed {
                client: self.id.clone(),
                recipient: envelope.recipient.clone(),
            });
        }
        let key = self.direction_key(&envelope.sender, &envelope.recipient)?;
        let plaintext = cipher
            .decrypt(&key, envelope.seq, &envelope.ciphertext, &envelope.tag)
            .map_err(|AuthError| PipelineError::Tamper {
                sender: envelope.sender.clone(),
                seq: envelope.seq,
            })?;
        let img = pnm::decode_pnm(&plaintext).map_err(|e| PipelineError::CorruptPayload(e.to_string()))?;
        let decision = self.check(&img, Stage::Receive)?;
        self.log.push(LogEntry {
            peer: envelope.sender.clone(),
            seq: Some(envelope.seq),
            decision: decision.clone(),
        });
        Ok((img, decision))
    }

    /// Counts a match only if this client opted in to telemetry.
    pub fn report_match(&self, decision: &FlagDecision, counter: &mut MatchCounter) {
        if let (true, Some(id)) = (self.telemetry, decision.record_id) {
            counter.record_match(id);
        }
    }
}

/// The only thing the relay learns about a message.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: UnixSeconds,
    pub sender: ClientId,
    pub recipient: ClientId,
    pub seq: u64,
    pub ciphertext_len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryFailure {
    pub t: UnixSeconds,
    pub sender: ClientId,
    pub recipient: ClientId,
    pub seq: u64,
}

/// Store-and-forward server. Sees envelopes, keeps metadata only.
#[derive(Clone, Debug, Default)]
pub struct Relay {
    queues: BTreeMap<ClientId, VecDeque<Envelope>>,
    trace: Vec<TraceRow>,
    failures: Vec<DeliveryFailure>,
}

impl Relay {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, client: impl Into<ClientId>) {
        self.queues.entry(client.into()).or_default();
    }

    /// Queues the envelope verbatim. Unknown recipients are dropped and the
    /// failure logged; returns whether it was queued.
    pub fn relay(&mut self, envelope: Envelope, t: UnixSeconds) -> bool {
        match self.queues.get_mut(&envelope.recipient) {
            Some(queue) => {
                self.trace.push(TraceRow {
                    t,
                    sender: envelope.sender.clone(),
                    recipient: envelope.recipient.clone(),
                    seq: envelope.seq,
                    ciphertext_len: envelope.ciphertext.len(),
                });
                queue.push_back(envelope);
                true
            }
            None => {
                self.failures.push(DeliveryFailure {
                    t,
                    sender: envelope.sender,
                    recipient: envelope.recipient,
                    seq: envelope.seq,
                });
                false
            }
        }
    }

    pub fn queue_len(&self, client: &str) -> usize {
        self.queues.get(client).map_or(0, VecDeque::len)
    }

    pub fn drain(&mut self, client: &str) -> Vec<Envelope> {
        self.queues
            .get_mut(client)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn failures(&self) -> &[DeliveryFailure] {
        &self.failures
    }
}
