use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cycle::{decide_recommendation, run_week};
use super::ingest::{merge, SourceKind};
use super::state::{DecisionRecord, TwinConfig, TwinState, WeeklyCycleResult};
use super::TwinError;
use crate::forecast::ForecastConfig;

/// A state change as recorded in the log. Seeds and sample counts are
/// stored so replays are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Ingest { kind: SourceKind, payload: String },
    RunWeek { week: u32, seed: u64, samples: usize },
    Decision {
        action_id: String,
        adopted: bool,
        #[serde(default)]
        reason: String,
        timestamp: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Worker threads for sampling. Does not change results.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Twin {
    initial: TwinState,
    state: TwinState,
    events: Vec<Event>,
}

impl Twin {
    pub fn new(config: TwinConfig) -> Self {
        Self::from_initial(TwinState::new(config))
    }

    pub fn from_initial(initial: TwinState) -> Self {
        Self {
            state: initial.clone(),
            initial,
            events: Vec::new(),
        }
    }

    pub fn state(&self) -> &TwinState {
        &self.state
    }

    pub fn initial(&self) -> &TwinState {
        &self.initial
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn version(&self) -> u64 {
        self.state.version
    }

    /// Rejects writes based on an outdated read.
    pub fn check_version(&self, expected: u64) -> Result<(), TwinError> {
        if expected != self.state.version {
            return Err(TwinError::StaleVersion {
                expected,
                current: self.state.version,
            });
        }
        Ok(())
    }

    pub fn ingest(&mut self, kind: SourceKind, payload: &str) -> Result<u64, TwinError> {
        self.apply(
            Event::Ingest {
                kind,
                payload: payload.to_string(),
            },
            None,
        )?;
        Ok(self.state.version)
    }

    /// Runs the next week, or returns the cached result for a week that
    /// already ran.
    pub fn run_week(&mut self, week: u32, opts: RunOptions) -> Result<WeeklyCycleResult, TwinError> {
        if let Some(done) = self.state.weeks.get(&week) {
            return Ok(done.clone());
        }
        let event = Event::RunWeek {
            week,
            seed: opts.seed.unwrap_or(self.state.config.seed),
            samples: opts.samples.unwrap_or(self.state.config.samples),
        };
        self.apply(event, opts.threads)?;
        Ok(self.state.weeks[&week].clone())
    }

    pub fn decide(
        &mut self,
        action_id: &str,
        adopted: bool,
        reason: &str,
        timestamp: &str,
    ) -> Result<DecisionRecord, TwinError> {
        self.apply(
            Event::Decision {
                action_id: action_id.to_string(),
                adopted,
                reason: reason.to_string(),
                timestamp: timestamp.to_string(),
            },
            None,
        )?;
        Ok(self.state.decision_log.last().cloned().expect("decision recorded"))
    }

    /// Applies an event to a copy of the state and commits only on success.
    fn apply(&mut self, event: Event, threads: Option<usize>) -> Result<(), TwinError> {
        let mut next = self.state.clone();
        apply_event(&mut next, &event, threads)?;
        self.state = next;
        self.events.push(event);
        Ok(())
    }

    /// Rebuilds a twin from its initial state and event log.
    pub fn replay(initial: TwinState, events: &[Event]) -> Result<Self, TwinError> {
        let mut twin = Self::from_initial(initial);
        for e in events {
            twin.apply(e.clone(), None)?;
        }
        Ok(twin)
    }

    /// Like `replay`, but skips decisions that no longer apply, as happens
    /// when a component is switched off.
    pub(crate) fn replay_lenient(initial: TwinState, events: &[Event]) -> Result<Self, TwinError> {
        let mut twin = Self::from_initial(initial);
        for e in events {
            match twin.apply(e.clone(), None) {
                Ok(()) => {}
                Err(_) if matches!(e, Event::Decision { .. }) => {}
                Err(err) => return Err(err),
            }
        }
        Ok(twin)
    }
}

fn apply_event(state: &mut TwinState, event: &Event, threads: Option<usize>) -> Result<(), TwinError> {
    state.version += 1;
    match event {
        Event::Ingest { kind, payload } => merge(state, *kind, payload),
        Event::RunWeek { week, seed, samples } => {
            let mut cfg = ForecastConfig::new(*samples, *seed);
            if let Some(t) = threads {
                cfg = cfg.with_threads(t);
            }
            run_week(state, *week, &cfg).map(|_| ())
        }
        Event::Decision {
            action_id,
            adopted,
            reason,
            timestamp,
        } => decide_recommendation(state, action_id, *adopted, reason, timestamp).map(|_| ()),
    }
}

const MAGIC: &str = "ptwin-snapshot 1 sha256:";

/// Serialises a state with a checksum header line.
pub fn write_snapshot(state: &TwinState) -> String {
    let body = serde_json::to_string(state).expect("state serializes");
    let digest = hex::encode(Sha256::digest(body.as_bytes()));
    format!("{MAGIC}{digest}\n{body}")
}

pub fn read_snapshot(text: &str) -> Result<TwinState, TwinError> {
    let corrupt = |m: &str| TwinError::CorruptSnapshot(m.to_string());
    let (header, body) = text.split_once('\n').ok_or_else(|| corrupt("missing header"))?;
    let digest = header.strip_prefix(MAGIC).ok_or_else(|| corrupt("unrecognised header"))?;
    if hex::encode(Sha256::digest(body.as_bytes())) != digest {
        return Err(corrupt("checksum mismatch"));
    }
    serde_json::from_str(body).map_err(|e| TwinError::CorruptSnapshot(e.to_string()))
}

/// A project directory: initial and latest snapshots plus the event and
/// decision logs.
#[derive(Debug, Clone)]
pub struct ProjectStore {
    dir: PathBuf,
}

impl ProjectStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self) -> bool {
        self.path("state.snap").exists()
    }

    pub fn init(&self, config: TwinConfig) -> Result<Twin, TwinError> {
        fs::create_dir_all(&self.dir)?;
        let twin = Twin::new(config);
        write_atomic(&self.path("initial.snap"), &write_snapshot(twin.initial()))?;
        write_atomic(&self.path("state.snap"), &write_snapshot(twin.state()))?;
        fs::write(self.path("events.jsonl"), "")?;
        fs::write(self.path("decisions.jsonl"), "")?;
        Ok(twin)
    }

    pub fn load(&self) -> Result<Twin, TwinError> {
        let initial = read_snapshot(&fs::read_to_string(self.path("initial.snap"))?)?;
        let state = read_snapshot(&fs::read_to_string(self.path("state.snap"))?)?;
        let events = fs::read_to_string(self.path("events.jsonl"))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| TwinError::CorruptSnapshot(format!("event log: {e}"))))
            .collect::<Result<Vec<Event>, _>>()?;
        Ok(Twin { initial, state, events })
    }

    /// Appends the events and decisions not yet on disk, then replaces the
    /// latest snapshot.
    pub fn save(&self, twin: &Twin) -> Result<(), TwinError> {
        let on_disk = fs::read_to_string(self.path("events.jsonl"))?.lines().filter(|l| !l.trim().is_empty()).count();
        let mut log = fs::OpenOptions::new().append(true).open(self.path("events.jsonl"))?;
        for e in &twin.events[on_disk.min(twin.events.len())..] {
            writeln!(log, "{}", serde_json::to_string(e).expect("event serializes"))?;
        }
        let decided = fs::read_to_string(self.path("decisions.jsonl"))?.lines().filter(|l| !l.trim().is_empty()).count();
        let mut dlog = fs::OpenOptions::new().append(true).open(self.path("decisions.jsonl"))?;
        for d in &twin.state.decision_log[decided.min(twin.state.decision_log.len())..] {
            writeln!(dlog, "{}", serde_json::to_string(d).expect("record serializes"))?;
        }
        write_atomic(&self.path("state.snap"), &write_snapshot(&twin.state))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), TwinError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
