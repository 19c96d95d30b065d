//! Durable snapshot and event history for monitored files.
//!
//! `log.jsonl` holds snapshot headers, events and decisions in order;
//! workbook bodies live in `objects/<hash>.wb.json`. The controlled baseline
//! of each file is derived by replay: the first snapshot, then the target of
//! every auto-logged event and of every approval that rebaselines.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{replace_durably, Log, LogError};
use crate::timefmt::Timestamp;
use crate::workbook::{parse_canonical, serialize_canonical, Workbook};

use super::alerts::{apply_alert_rules, AlertRuleSet};
use super::diff::diff;
use super::events::{ChangeEvent, DecisionError, EventState, ReviewDecision};
use super::snapshot::{content_hash, Snapshot, SnapshotHeader};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("{0}")]
    Decision(#[from] DecisionError),
    #[error("file {0:?} is not monitored")]
    UnknownFile(String),
    #[error("snapshot {1} of {0:?} not found")]
    UnknownSnapshot(String, u64),
    #[error("stored workbook {0} does not match its hash")]
    HashMismatch(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Log(_) | StoreError::HashMismatch(_) => "storage-failure",
            StoreError::Decision(e) => e.code(),
            StoreError::UnknownFile(_) | StoreError::UnknownSnapshot(..) => "not-found",
            StoreError::Invalid { .. } => "validation-error",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Entry {
    Snapshot(SnapshotHeader),
    Event(Box<ChangeEvent>),
    Decision {
        event_id: u64,
        decision: ReviewDecision,
        rebaseline: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonitoredFile {
    pub file_key: String,
    pub baseline: u64,
    pub latest: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Submission {
    pub snapshot: SnapshotHeader,
    /// Absent for the baseline and for content identical to the baseline.
    pub event: Option<ChangeEvent>,
}

pub struct ChangeStore {
    objects: PathBuf,
    log: Log,
    history: BTreeMap<String, Vec<SnapshotHeader>>,
    baselines: BTreeMap<String, u64>,
    events: BTreeMap<u64, ChangeEvent>,
}

impl ChangeStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let objects = dir.join("objects");
        fs::create_dir_all(&objects).map_err(|e| LogError::io(&objects, e))?;
        let (log, entries) = Log::open::<Entry>(&dir.join("log.jsonl"))?;
        let mut store = ChangeStore {
            objects,
            log,
            history: BTreeMap::new(),
            baselines: BTreeMap::new(),
            events: BTreeMap::new(),
        };
        for entry in entries {
            store.replay(entry)?;
        }
        Ok(store)
    }

    fn replay(&mut self, entry: Entry) -> Result<(), StoreError> {
        match entry {
            Entry::Snapshot(h) => {
                self.baselines.entry(h.file_key.clone()).or_insert(h.snapshot_id);
                self.history.entry(h.file_key.clone()).or_default().push(h);
            }
            Entry::Event(e) => {
                if e.state == EventState::AutoLogged {
                    self.advance_baseline(&e.file_key, e.to_snapshot);
                }
                self.events.insert(e.event_id, *e);
            }
            Entry::Decision {
                event_id,
                decision,
                rebaseline,
            } => {
                let event = self
                    .events
                    .get_mut(&event_id)
                    .ok_or(DecisionError::UnknownEvent(event_id))?;
                event.decide(decision)?;
                if rebaseline && event.state == EventState::Approved {
                    let (key, to) = (event.file_key.clone(), event.to_snapshot);
                    self.advance_baseline(&key, to);
                }
            }
        }
        Ok(())
    }

    // Never moves backwards: approving an older event after a newer one
    // keeps the newer baseline.
    fn advance_baseline(&mut self, file_key: &str, to: u64) {
        let b = self.baselines.entry(file_key.to_string()).or_insert(to);
        *b = (*b).max(to);
    }

    fn object_path(&self, hash: &str) -> PathBuf {
        self.objects.join(format!("{hash}.wb.json"))
    }

    fn store_object(&self, hash: &str, wb: &Workbook) -> Result<(), StoreError> {
        let path = self.object_path(hash);
        if !path.exists() {
            replace_durably(&path, serialize_canonical(wb).as_bytes())?;
        }
        Ok(())
    }

    fn load_object(&self, hash: &str) -> Result<Workbook, StoreError> {
        let path = self.object_path(hash);
        let text = fs::read_to_string(&path).map_err(|e| LogError::io(&path, e))?;
        let wb = parse_canonical(&text).map_err(|_| StoreError::HashMismatch(hash.to_string()))?;
        if content_hash(&wb) != hash {
            return Err(StoreError::HashMismatch(hash.to_string()));
        }
        Ok(wb)
    }

    /// Records a new snapshot. The first one becomes the baseline; later ones
    /// are diffed against the baseline and logged as an event when anything
    /// changed.
    pub fn submit(
        &mut self,
        file_key: &str,
        wb: &Workbook,
        author: &str,
        at: Timestamp,
        rules: &AlertRuleSet,
    ) -> Result<Submission, StoreError> {
        if file_key.trim().is_empty() {
            return Err(StoreError::Invalid {
                field: "file_key",
                message: "must be non-empty".into(),
            });
        }
        if author.trim().is_empty() {
            return Err(StoreError::Invalid {
                field: "author",
                message: "must be non-empty".into(),
            });
        }
        rules.validate().map_err(|message| StoreError::Invalid { field: "rules", message })?;
        let prev = self.history.get(file_key).and_then(|h| h.last()).map(|h| h.snapshot_id);
        let snapshot = Snapshot::take(prev, file_key, wb.clone(), at);
        self.store_object(&snapshot.content_hash, wb)?;

        let event = match self.baselines.get(file_key) {
            None => None,
            Some(&base) => {
                let old = self.workbook(file_key, base)?;
                let d = diff(&old, wb);
                if d.is_empty() {
                    None
                } else {
                    let triggers = apply_alert_rules(&d, &old, rules);
                    let id = self.events.keys().next_back().map_or(1, |k| k + 1);
                    Some(ChangeEvent::detected(
                        id,
                        file_key,
                        (base, snapshot.snapshot_id),
                        d,
                        author.trim(),
                        at,
                        triggers,
                    ))
                }
            }
        };
        let header = snapshot.header();
        let mut entries = vec![Entry::Snapshot(header.clone())];
        entries.extend(event.clone().map(|e| Entry::Event(Box::new(e))));
        self.log.append_all(&entries)?;
        for entry in entries {
            self.replay(entry)?;
        }
        Ok(Submission {
            snapshot: header,
            event,
        })
    }

    /// Settles a pending event. Approval moves the baseline to the event's
    /// snapshot when `rebaseline` is set; rejection never does.
    pub fn decide(
        &mut self,
        event_id: u64,
        decision: ReviewDecision,
        rebaseline: bool,
    ) -> Result<ChangeEvent, StoreError> {
        let event = self.events.get(&event_id).ok_or(DecisionError::UnknownEvent(event_id))?;
        event.check_decision(&decision)?;
        let entry = Entry::Decision {
            event_id,
            decision,
            rebaseline,
        };
        self.log.append(&entry)?;
        self.replay(entry)?;
        Ok(self.events[&event_id].clone())
    }

    pub fn event(&self, event_id: u64) -> Option<&ChangeEvent> {
        self.events.get(&event_id)
    }

    /// Events in id order, optionally filtered by state.
    pub fn events(&self, state: Option<EventState>) -> Vec<&ChangeEvent> {
        self.events
            .values()
            .filter(|e| state.is_none_or(|s| e.state == s))
            .collect()
    }

    pub fn files(&self) -> Vec<MonitoredFile> {
        self.history
            .iter()
            .map(|(key, h)| MonitoredFile {
                file_key: key.clone(),
                baseline: self.baselines[key],
                latest: h.last().map_or(0, |s| s.snapshot_id),
            })
            .collect()
    }

    pub fn history(&self, file_key: &str) -> &[SnapshotHeader] {
        self.history.get(file_key).map_or(&[], Vec::as_slice)
    }

    pub fn baseline(&self, file_key: &str) -> Option<u64> {
        self.baselines.get(file_key).copied()
    }

    pub fn workbook(&self, file_key: &str, snapshot_id: u64) -> Result<Workbook, StoreError> {
        let header = self
            .history(file_key)
            .iter()
            .find(|h| h.snapshot_id == snapshot_id)
            .ok_or_else(|| StoreError::UnknownSnapshot(file_key.to_string(), snapshot_id))?;
        self.load_object(&header.content_hash)
    }

    pub fn snapshot(&self, file_key: &str, snapshot_id: u64) -> Result<Snapshot, StoreError> {
        let header = self
            .history(file_key)
            .iter()
            .find(|h| h.snapshot_id == snapshot_id)
            .ok_or_else(|| StoreError::UnknownSnapshot(file_key.to_string(), snapshot_id))?
            .clone();
        let workbook = self.load_object(&header.content_hash)?;
        Ok(Snapshot::from_parts(header, workbook))
    }
}
