//! Document formats: score, property and environment JSON, event files,
//! JSON-lines traces and verifier evidence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ntscore_core::engine::Snapshot;
use ntscore_core::score::{ControlMessage, Tu};
use ntscore_core::verify::{EnvSpec, Property, TraceUnit};
use ntscore_core::{Event, Score};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Events { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.into(), source })
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.into(), source })
}

pub fn load_score(path: &Path) -> Result<Score, FormatError> {
    from_json(path)
}

pub fn score_to_json(s: &Score) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("score serializes");
    out.push('\n');
    out
}

pub fn load_property(path: &Path) -> Result<Property, FormatError> {
    from_json(path)
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EnvDoc {
    #[serde(default)]
    pub free_events: Vec<String>,
    #[serde(default)]
    pub scripted: Vec<ScriptedDoc>,
    #[serde(default)]
    pub var_ranges: BTreeMap<String, Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedDoc {
    pub tu: Tu,
    pub event: String,
}

impl EnvDoc {
    pub fn into_spec(self) -> Result<EnvSpec, FormatError> {
        let mut scripted = Vec::new();
        for s in self.scripted {
            let ev = Event::parse(&s.event).map_err(|e| FormatError::Invalid(e.to_string()))?;
            scripted.push((s.tu, ev));
        }
        Ok(EnvSpec { free_events: self.free_events, scripted, var_ranges: self.var_ranges })
    }
}

pub fn load_env(path: &Path) -> Result<EnvSpec, FormatError> {
    from_json::<EnvDoc>(path)?.into_spec()
}

/// Parses an event file: one `tu event` per line, `event` being `name` or
/// `var=value`. Blank lines and `#` comments are skipped.
pub fn parse_events(text: &str) -> Result<Vec<(Tu, Event)>, FormatError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| FormatError::Events { line: i + 1, message };
        let (tu, ev) = line.split_once(char::is_whitespace).ok_or_else(|| err("expected `tu event`".into()))?;
        let tu: Tu = tu.parse().map_err(|_| err(format!("bad unit `{tu}`")))?;
        let ev = Event::parse(ev).map_err(|e| err(e.to_string()))?;
        out.push((tu, ev));
    }
    Ok(out)
}

pub fn load_events(path: &Path) -> Result<Vec<(Tu, Event)>, FormatError> {
    parse_events(&read_text(path)?)
}

/// One line of a run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceLine {
    pub tu: Tu,
    pub messages: Vec<ControlMessage>,
    pub compute_ms: f64,
}

impl TraceLine {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace line serializes")
    }
}

/// Evidence unit as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceUnit {
    pub tu: Tu,
    pub inputs: Vec<String>,
    pub choices: Vec<usize>,
    pub signals: Vec<String>,
    pub failure: bool,
}

pub fn evidence_to_json(units: &[TraceUnit]) -> String {
    let doc: Vec<EvidenceUnit> = units
        .iter()
        .map(|u| EvidenceUnit {
            tu: u.tu,
            inputs: u.inputs.iter().map(|e| e.to_string()).collect(),
            choices: u.choices.clone(),
            signals: u.signals.clone(),
            failure: u.failure,
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&doc).expect("evidence serializes");
    out.push('\n');
    out
}

pub fn load_evidence(path: &Path) -> Result<Vec<TraceUnit>, FormatError> {
    let doc: Vec<EvidenceUnit> = from_json(path)?;
    doc.into_iter()
        .map(|u| {
            let inputs = u
                .inputs
                .iter()
                .map(|e| Event::parse(e).map_err(|e| FormatError::Invalid(e.to_string())))
                .collect::<Result<_, _>>()?;
            Ok(TraceUnit { tu: u.tu, inputs, choices: u.choices, signals: u.signals, failure: u.failure })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObjectDoc {
    pub id: String,
    pub state: String,
    pub remaining: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PendingDoc {
    pub id: String,
    pub event: String,
    pub window: (Tu, Tu),
}

/// Per-unit snapshot sent to live clients.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SnapshotDoc {
    pub tu: Option<Tu>,
    pub objects: Vec<ObjectDoc>,
    pub pending_points: Vec<PendingDoc>,
    pub messages: Vec<ControlMessage>,
}

impl From<&Snapshot> for SnapshotDoc {
    fn from(s: &Snapshot) -> Self {
        SnapshotDoc {
            tu: s.tu,
            objects: s
                .objects
                .iter()
                .map(|o| ObjectDoc { id: o.id.clone(), state: o.state.as_str().into(), remaining: o.remaining })
                .collect(),
            pending_points: s
                .pending_points
                .iter()
                .map(|p| PendingDoc { id: p.id.clone(), event: p.event.clone(), window: p.window })
                .collect(),
            messages: s.messages.clone(),
        }
    }
}
