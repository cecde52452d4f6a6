//! Scenario scripts: one JSON event per line,
//! `{t, kind, actor, recipient?, group?, image_path?, bundle_path?}`.
//!
//! Kinds are `send` (to a `recipient` or a `group`), `apply_bundle` (actor
//! `*` applies to every client) and `join` (actor becomes a member of
//! `group`). Timestamps are epoch seconds or ISO-8601 strings and must not
//! decrease.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::timestamp::{self, UnixSeconds};

/// Actor that addresses every client in an `apply_bundle` event.
pub const ALL_CLIENTS: &str = "*";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Client(String),
    Group(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Send { target: Target, image_path: String },
    ApplyBundle { bundle_path: String },
    Join { group: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptEvent {
    /// 1-based source line; 0 for events built in code.
    pub line: usize,
    pub t: UnixSeconds,
    pub actor: String,
    pub kind: EventKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    t: Value,
    kind: String,
    actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recipient: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle_path: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimScript {
    pub events: Vec<ScriptEvent>,
}

impl ScriptEvent {
    pub fn send(t: UnixSeconds, actor: &str, recipient: &str, image_path: &str) -> Self {
        Self::new(
            t,
            actor,
            EventKind::Send {
                target: Target::Client(recipient.into()),
                image_path: image_path.into(),
            },
        )
    }

    pub fn send_group(t: UnixSeconds, actor: &str, group: &str, image_path: &str) -> Self {
        Self::new(
            t,
            actor,
            EventKind::Send {
                target: Target::Group(group.into()),
                image_path: image_path.into(),
            },
        )
    }

    pub fn apply_bundle(t: UnixSeconds, actor: &str, bundle_path: &str) -> Self {
        Self::new(
            t,
            actor,
            EventKind::ApplyBundle {
                bundle_path: bundle_path.into(),
            },
        )
    }

    pub fn join(t: UnixSeconds, actor: &str, group: &str) -> Self {
        Self::new(t, actor, EventKind::Join { group: group.into() })
    }

    fn new(t: UnixSeconds, actor: &str, kind: EventKind) -> Self {
        ScriptEvent {
            line: 0,
            t,
            actor: actor.into(),
            kind,
        }
    }

    fn to_raw(&self) -> RawEvent {
        let mut raw = RawEvent {
            t: Value::from(self.t),
            kind: String::new(),
            actor: self.actor.clone(),
            recipient: None,
            group: None,
            image_path: None,
            bundle_path: None,
        };
        match &self.kind {
            EventKind::Send { target, image_path } => {
                raw.kind = "send".into();
                match target {
                    Target::Client(c) => raw.recipient = Some(c.clone()),
                    Target::Group(g) => raw.group = Some(g.clone()),
                }
                raw.image_path = Some(image_path.clone());
            }
            EventKind::ApplyBundle { bundle_path } => {
                raw.kind = "apply_bundle".into();
                raw.bundle_path = Some(bundle_path.clone());
            }
            EventKind::Join { group } => {
                raw.kind = "join".into();
                raw.group = Some(group.clone());
            }
        }
        raw
    }
}

fn parse_event(raw: RawEvent) -> Result<(UnixSeconds, String, EventKind), String> {
    let t = match &raw.t {
        Value::Number(n) => n.as_i64().ok_or_else(|| format!("t {n} is not an integer"))?,
        Value::String(s) => timestamp::parse(s).map_err(|e| e.to_string())?,
        other => return Err(format!("t must be a number or string, got {other}")),
    };
    if raw.actor.is_empty() {
        return Err("actor is empty".into());
    }
    let unexpected = |field: &str, present: bool| {
        if present {
            Err(format!("{field} is not allowed for kind {:?}", raw.kind))
        } else {
            Ok(())
        }
    };
    let kind = match raw.kind.as_str() {
        "send" => {
            unexpected("bundle_path", raw.bundle_path.is_some())?;
            let target = match (raw.recipient, raw.group) {
                (Some(r), None) if !r.is_empty() => Target::Client(r),
                (None, Some(g)) if !g.is_empty() => Target::Group(g),
                _ => return Err("send needs exactly one of recipient or group".into()),
            };
            let image_path = raw.image_path.ok_or("send needs image_path")?;
            EventKind::Send { target, image_path }
        }
        "apply_bundle" => {
            unexpected("recipient", raw.recipient.is_some())?;
            unexpected("group", raw.group.is_some())?;
            unexpected("image_path", raw.image_path.is_some())?;
            EventKind::ApplyBundle {
                bundle_path: raw.bundle_path.ok_or("apply_bundle needs bundle_path")?,
            }
        }
        "join" => {
            unexpected("recipient", raw.recipient.is_some())?;
            unexpected("image_path", raw.image_path.is_some())?;
            unexpected("bundle_path", raw.bundle_path.is_some())?;
            EventKind::Join {
                group: raw.group.filter(|g| !g.is_empty()).ok_or("join needs group")?,
            }
        }
        other => return Err(format!("unknown kind {other:?}")),
    };
    if raw.actor == ALL_CLIENTS && !matches!(kind, EventKind::ApplyBundle { .. }) {
        return Err(format!("actor {ALL_CLIENTS:?} is only valid for apply_bundle"));
    }
    Ok((t, raw.actor, kind))
}

impl SimScript {
    /// Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut events: Vec<ScriptEvent> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| ScriptError { line: line_no, message };
            let raw: RawEvent = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let (t, actor, kind) = parse_event(raw).map_err(err)?;
            if let Some(prev) = events.last() {
                if t < prev.t {
                    return Err(err(format!("t {t} precedes previous event at {}", prev.t)));
                }
            }
            events.push(ScriptEvent {
                line: line_no,
                t,
                actor,
                kind,
            });
        }
        Ok(SimScript { events })
    }

    /// One compact JSON object per line, `t` as epoch seconds.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(&e.to_raw()).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    /// Renumbers `line` to match [`Self::to_jsonl`] output.
    pub fn renumbered(mut self) -> Self {
        for (i, e) in self.events.iter_mut().enumerate() {
            e.line = i + 1;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_kinds() {
        let text = r#"
{"t": 1, "kind": "join", "actor": "a", "group": "g"}
{"t": "2019-04-11", "kind": "apply_bundle", "actor": "*", "bundle_path": "b1.json"}
{"t": 1554940800, "kind": "send", "actor": "a", "recipient": "b", "image_path": "x.pgm"}
{"t": 1554940801, "kind": "send", "actor": "a", "group": "g", "image_path": "x.pgm"}
"#;
        let s = SimScript::parse(text).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.events[0].line, 2);
        assert_eq!(s.events[1].t, 1_554_940_800);
        assert_eq!(
            s.events[3].kind,
            EventKind::Send {
                target: Target::Group("g".into()),
                image_path: "x.pgm".into()
            }
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            (
                "{\"t\":1,\"kind\":\"send\",\"actor\":\"a\",\"image_path\":\"x\"}",
                "exactly one",
            ),
            (
                "{\"t\":1,\"kind\":\"send\",\"actor\":\"a\",\"recipient\":\"b\",\"group\":\"g\",\"image_path\":\"x\"}",
                "exactly one",
            ),
            ("{\"t\":1,\"kind\":\"fly\",\"actor\":\"a\"}", "unknown kind"),
            (
                "{\"t\":1,\"kind\":\"join\",\"actor\":\"*\",\"group\":\"g\"}",
                "only valid",
            ),
            (
                "{\"t\":1,\"kind\":\"join\",\"actor\":\"a\",\"group\":\"g\",\"extra\":1}",
                "unknown field",
            ),
            (
                "{\"t\":true,\"kind\":\"join\",\"actor\":\"a\",\"group\":\"g\"}",
                "number or string",
            ),
            ("not json", "expected"),
        ];
        for (bad, needle) in cases {
            let text = format!("{{\"t\":0,\"kind\":\"join\",\"actor\":\"a\",\"group\":\"g\"}}\n\n{bad}\n");
            let err = SimScript::parse(&text).unwrap_err();
            assert_eq!(err.line, 3, "{bad}");
            assert!(err.message.contains(needle), "{bad}: {}", err.message);
        }
    }

    #[test]
    fn time_must_not_decrease() {
        let text = "{\"t\":5,\"kind\":\"join\",\"actor\":\"a\",\"group\":\"g\"}\n\
                    {\"t\":5,\"kind\":\"join\",\"actor\":\"b\",\"group\":\"g\"}\n\
                    {\"t\":4,\"kind\":\"join\",\"actor\":\"c\",\"group\":\"g\"}\n";
        assert_eq!(SimScript::parse(text).unwrap_err().line, 3);
    }

    #[test]
    fn jsonl_roundtrip() {
        let s = SimScript {
            events: vec![
                ScriptEvent::join(1, "a", "g"),
                ScriptEvent::apply_bundle(2, "*", "b.json"),
                ScriptEvent::send(3, "a", "b", "i.pgm"),
                ScriptEvent::send_group(3, "a", "g", "i.pgm"),
            ],
        }
        .renumbered();
        let text = s.to_jsonl();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"t":1,"kind":"join","actor":"a","group":"g"}"#
        );
        assert_eq!(SimScript::parse(&text).unwrap(), s);
        assert!(SimScript::parse("").unwrap().is_empty());
    }
}
