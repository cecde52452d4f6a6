//! Simulation of on-device checks inside an end-to-end encrypted messenger.
//!
//! Senders hash and look up an image before encrypting it; receivers decrypt,
//! re-hash and look up against their own snapshot. The relay stores
//! envelopes and a metadata trace and never sees plaintext.

mod cipher;
mod client;
pub mod scenario;
pub mod script;
mod sim;

pub use cipher::{AuthError, ChaChaHmac, CipherSuite, Sealed, SessionKey};
pub use client::{
    Client, ClientId, DeliveryFailure, Envelope, FlagDecision, FlagPolicy, LogEntry, MatchCounter, Outcome,
    PipelineError, Relay, Stage, TraceRow,
};
pub use script::{ScriptError, SimScript};
pub use sim::{
    derive_session_key, run_scenario, run_scenario_observed, AssetSource, BundleRow, DecisionRow, FsAssets,
    MemoryAssets, SimConfig, SimError, SimReport,
};
