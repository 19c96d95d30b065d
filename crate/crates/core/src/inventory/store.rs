//! The registry: in-memory state rebuilt from `snapshot.json` plus the
//! entries of `log.jsonl` newer than it. Every write is one fsynced append;
//! compaction folds the log into a fresh snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{replace_durably, Log, LogError};
use crate::standards::{AuditReport, PlanError, PlanItem, PlanStatus, RemediationPlan};
use crate::timefmt::{self, Timestamp};

use super::records::*;

pub const DEFAULT_VALIDATION_FREQUENCY_DAYS: u32 = 365;
const COMPACT_AFTER: usize = 5_000;

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },
    #[error("file_key {0:?} is already used by an active record")]
    DuplicateFileKey(String),
    #[error("record {0} not found")]
    NotFound(u64),
    #[error("plan item {0} not found")]
    PlanItemNotFound(u64),
    #[error("record was modified at {current}; reload and retry")]
    Conflict { current: String },
    #[error("record is {0}; only the status note can change")]
    Immutable(RecordStatus),
    #[error("{0}")]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Storage(#[from] LogError),
}

impl InventoryError {
    pub fn code(&self) -> &'static str {
        match self {
            InventoryError::Validation { .. } => "validation-error",
            InventoryError::DuplicateFileKey(_) => "duplicate-file-key",
            InventoryError::NotFound(_) | InventoryError::PlanItemNotFound(_) => "not-found",
            InventoryError::Conflict { .. } => "conflict",
            InventoryError::Immutable(_) => "record-immutable",
            InventoryError::Plan(e) => e.code(),
            InventoryError::Storage(_) => "storage-failure",
        }
    }

    pub fn field(&self) -> Option<&'static str> {
        match self {
            InventoryError::Validation { field, .. } => Some(field),
            InventoryError::DuplicateFileKey(_) => Some("file_key"),
            _ => None,
        }
    }
}

fn invalid(field: &'static str, message: impl Into<String>) -> InventoryError {
    InventoryError::Validation {
        field,
        message: message.into(),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(field: &'static str, text: &str) -> Result<T, InventoryError> {
    serde_json::from_value(serde_json::Value::String(text.trim().to_ascii_lowercase()))
        .map_err(|_| invalid(field, format!("unknown value {text:?}")))
}

fn parse_time(field: &'static str, text: &str) -> Result<Timestamp, InventoryError> {
    timefmt::parse(text).map_err(|e| invalid(field, e))
}

fn required(field: &'static str, text: &str) -> Result<String, InventoryError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(invalid(field, "is required"));
    }
    Ok(t.to_string())
}

fn file_key_of(raw: Option<&str>) -> Option<String> {
    raw.map(str::trim).filter(|k| !k.is_empty()).map(str::to_string)
}

/// Registration request. Enumerations arrive as text so that a bad value
/// reports its field instead of failing the whole body.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewRecord {
    pub name: String,
    pub owner: String,
    pub line_manager: String,
    pub business_process: String,
    pub category: String,
    pub tier: String,
    pub file_key: Option<String>,
    pub last_validated_at: Option<String>,
    pub validation_frequency_days: Option<i64>,
}

fn frequency(raw: i64) -> Result<u32, InventoryError> {
    u32::try_from(raw)
        .ok()
        .filter(|d| *d > 0)
        .ok_or_else(|| invalid("validation_frequency_days", "must be a positive whole number of days"))
}

impl NewRecord {
    fn build(&self, record_id: u64, principal: &str, at: Timestamp) -> Result<EucRecord, InventoryError> {
        Ok(EucRecord {
            record_id,
            name: required("name", &self.name)?,
            owner: required("owner", &self.owner)?,
            line_manager: self.line_manager.trim().to_string(),
            business_process: self.business_process.trim().to_string(),
            category: parse_enum("category", &required("category", &self.category)?)?,
            tier: parse_enum("tier", &required("tier", &self.tier)?)?,
            file_key: file_key_of(self.file_key.as_deref()),
            last_validated_at: self
                .last_validated_at
                .as_deref()
                .map(|t| parse_time("last_validated_at", t))
                .transpose()?,
            validation_frequency_days: frequency(
                self.validation_frequency_days
                    .unwrap_or(DEFAULT_VALIDATION_FREQUENCY_DAYS.into()),
            )?,
            status: RecordStatus::Active,
            status_note: None,
            created_at: at,
            updated_at: at,
            created_by: principal.to_string(),
            updated_by: principal.to_string(),
        })
    }
}

/// Partial update guarded by the `updated_at` the client last saw. An empty
/// `file_key` clears the link.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordPatch {
    pub expected_updated_at: String,
    pub name: Option<String>,
    pub owner: Option<String>,
    pub line_manager: Option<String>,
    pub business_process: Option<String>,
    pub category: Option<String>,
    pub tier: Option<String>,
    pub file_key: Option<String>,
    pub last_validated_at: Option<String>,
    pub validation_frequency_days: Option<i64>,
    pub status: Option<String>,
    pub status_note: Option<String>,
}

impl RecordPatch {
    fn touches_more_than_note(&self) -> bool {
        self.name.is_some()
            || self.owner.is_some()
            || self.line_manager.is_some()
            || self.business_process.is_some()
            || self.category.is_some()
            || self.tier.is_some()
            || self.file_key.is_some()
            || self.last_validated_at.is_some()
            || self.validation_frequency_days.is_some()
            || self.status.is_some()
    }

    fn apply(&self, rec: &mut EucRecord) -> Result<(), InventoryError> {
        if let Some(v) = &self.name {
            rec.name = required("name", v)?;
        }
        if let Some(v) = &self.owner {
            rec.owner = required("owner", v)?;
        }
        if let Some(v) = &self.line_manager {
            rec.line_manager = v.trim().to_string();
        }
        if let Some(v) = &self.business_process {
            rec.business_process = v.trim().to_string();
        }
        if let Some(v) = &self.category {
            rec.category = parse_enum("category", v)?;
        }
        if let Some(v) = &self.tier {
            rec.tier = parse_enum("tier", v)?;
        }
        if let Some(v) = &self.file_key {
            rec.file_key = file_key_of(Some(v));
        }
        if let Some(v) = &self.last_validated_at {
            rec.last_validated_at = Some(parse_time("last_validated_at", v)?);
        }
        if let Some(v) = self.validation_frequency_days {
            rec.validation_frequency_days = frequency(v)?;
        }
        if let Some(v) = &self.status {
            rec.status = parse_enum("status", v)?;
        }
        if let Some(v) = &self.status_note {
            rec.status_note = Some(v.trim().to_string()).filter(|n| !n.is_empty());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanItemPatch {
    pub status: Option<PlanStatus>,
    pub owner: Option<String>,
    pub justification: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct State {
    records: BTreeMap<u64, EucRecord>,
    audits: BTreeMap<u64, Vec<AuditReport>>,
    plans: BTreeMap<u64, RemediationPlan>,
    next_record: u64,
    next_item: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Op {
    Put { record: EucRecord },
    Audit { record_id: u64, report: AuditReport, plan: RemediationPlan },
    PlanItem { record_id: u64, item: PlanItem },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    seq: u64,
    #[serde(flatten)]
    op: Op,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnapshotFile {
    last_seq: u64,
    state: State,
}

impl State {
    fn apply(&mut self, op: Op) {
        match op {
            Op::Put { record } => {
                self.next_record = self.next_record.max(record.record_id);
                self.records.insert(record.record_id, record);
            }
            Op::Audit { record_id, report, plan } => {
                if let Some(max) = plan.items.iter().map(|i| i.item_id).max() {
                    self.next_item = self.next_item.max(max);
                }
                self.audits.entry(record_id).or_default().push(report);
                self.plans.insert(record_id, plan);
            }
            Op::PlanItem { record_id, item } => {
                if let Some(slot) = self
                    .plans
                    .get_mut(&record_id)
                    .and_then(|p| p.items.iter_mut().find(|i| i.item_id == item.item_id))
                {
                    *slot = item;
                }
            }
        }
    }
}

pub struct InventoryStore {
    snapshot_path: PathBuf,
    log: Log,
    state: State,
    seq: u64,
    since_compaction: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountRow {
    pub category: Category,
    pub tier: Tier,
    pub status: RecordStatus,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceRow {
    pub record_id: u64,
    pub name: String,
    pub compliance_score: f64,
    #[serde(with = "timefmt")]
    pub audited_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub total_records: u64,
    pub active_by_category: BTreeMap<Category, u64>,
    pub by_category_tier_status: Vec<CountRow>,
    /// Active records only.
    pub validation: BTreeMap<ValidationState, u64>,
    pub compliance: Vec<ComplianceRow>,
}

impl InventoryStore {
    pub fn open(dir: &Path) -> Result<Self, InventoryError> {
        std::fs::create_dir_all(dir).map_err(|e| LogError::io(dir, e))?;
        let snapshot_path = dir.join("snapshot.json");
        let (mut state, mut seq) = match std::fs::read_to_string(&snapshot_path) {
            Ok(text) => {
                let snap: SnapshotFile = serde_json::from_str(&text).map_err(|e| LogError::Corrupt {
                    path: snapshot_path.clone(),
                    line: 1,
                    message: e.to_string(),
                })?;
                (snap.state, snap.last_seq)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (State::default(), 0),
            Err(e) => return Err(LogError::io(&snapshot_path, e).into()),
        };
        let (log, entries) = Log::open::<Entry>(&dir.join("log.jsonl"))?;
        let mut since_compaction = 0;
        for entry in entries {
            // entries already folded into the snapshot by an interrupted compaction
            if entry.seq <= seq {
                continue;
            }
            seq = entry.seq;
            state.apply(entry.op);
            since_compaction += 1;
        }
        Ok(InventoryStore {
            snapshot_path,
            log,
            state,
            seq,
            since_compaction,
        })
    }

    fn commit(&mut self, ops: Vec<Op>) -> Result<(), InventoryError> {
        let entries: Vec<Entry> = ops
            .into_iter()
            .enumerate()
            .map(|(i, op)| Entry {
                seq: self.seq + 1 + i as u64,
                op,
            })
            .collect();
        self.log.append_all(&entries)?;
        for entry in entries {
            self.seq = entry.seq;
            self.state.apply(entry.op);
            self.since_compaction += 1;
        }
        if self.since_compaction >= COMPACT_AFTER {
            self.compact()?;
        }
        Ok(())
    }

    /// Writes the full state to `snapshot.json` and empties the log.
    pub fn compact(&mut self) -> Result<(), InventoryError> {
        let snap = SnapshotFile {
            last_seq: self.seq,
            state: self.state.clone(),
        };
        replace_durably(&self.snapshot_path, &serde_json::to_vec(&snap).expect("state serializes"))?;
        self.log.rewrite::<Entry>(&[])?;
        self.since_compaction = 0;
        Ok(())
    }

    fn check_file_key(&self, key: Option<&str>, except: Option<u64>) -> Result<(), InventoryError> {
        let Some(key) = key else { return Ok(()) };
        let clash = self
            .state
            .records
            .values()
            .any(|r| r.is_active() && Some(r.record_id) != except && r.file_key.as_deref() == Some(key));
        if clash {
            return Err(InventoryError::DuplicateFileKey(key.to_string()));
        }
        Ok(())
    }

    pub fn register(&mut self, new: &NewRecord, principal: &str, at: Timestamp) -> Result<EucRecord, InventoryError> {
        Ok(self.register_batch(std::slice::from_ref(new), principal, at)?.remove(0))
    }

    /// All-or-nothing registration with a single durable write.
    pub fn register_batch(
        &mut self,
        batch: &[NewRecord],
        principal: &str,
        at: Timestamp,
    ) -> Result<Vec<EucRecord>, InventoryError> {
        let principal = required("principal", principal)?;
        let mut keys = BTreeSet::new();
        let mut out = Vec::with_capacity(batch.len());
        for (i, new) in batch.iter().enumerate() {
            let rec = new.build(self.state.next_record + 1 + i as u64, &principal, at)?;
            self.check_file_key(rec.file_key.as_deref(), None)?;
            if let Some(k) = &rec.file_key {
                if !keys.insert(k.clone()) {
                    return Err(InventoryError::DuplicateFileKey(k.clone()));
                }
            }
            out.push(rec);
        }
        self.commit(out.iter().cloned().map(|record| Op::Put { record }).collect())?;
        Ok(out)
    }

    pub fn update(
        &mut self,
        record_id: u64,
        patch: &RecordPatch,
        principal: &str,
        at: Timestamp,
    ) -> Result<EucRecord, InventoryError> {
        let principal = required("principal", principal)?;
        let current = self.get(record_id).ok_or(InventoryError::NotFound(record_id))?;
        let expected = parse_time("expected_updated_at", &required("expected_updated_at", &patch.expected_updated_at)?)?;
        if expected != current.updated_at {
            return Err(InventoryError::Conflict {
                current: timefmt::format(&current.updated_at),
            });
        }
        if !current.is_active() && patch.touches_more_than_note() {
            return Err(InventoryError::Immutable(current.status));
        }
        let mut rec = current.clone();
        patch.apply(&mut rec)?;
        if rec.is_active() {
            self.check_file_key(rec.file_key.as_deref(), Some(record_id))?;
        }
        // strictly increasing, so the precondition tells every write apart
        rec.updated_at = at.max(current.updated_at + Duration::seconds(1));
        rec.updated_by = principal;
        self.commit(vec![Op::Put { record: rec.clone() }])?;
        Ok(rec)
    }

    pub fn get(&self, record_id: u64) -> Option<&EucRecord> {
        self.state.records.get(&record_id)
    }

    pub fn records(&self) -> impl Iterator<Item = &EucRecord> {
        self.state.records.values()
    }

    pub fn len(&self) -> usize {
        self.state.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.records.is_empty()
    }

    /// Stores an audit and the plan built from it, replacing the previous
    /// plan. Plan item ids are renumbered to be unique across the registry.
    pub fn store_audit(
        &mut self,
        record_id: u64,
        report: AuditReport,
        mut plan: RemediationPlan,
    ) -> Result<RemediationPlan, InventoryError> {
        self.get(record_id).ok_or(InventoryError::NotFound(record_id))?;
        for (i, item) in plan.items.iter_mut().enumerate() {
            item.item_id = self.state.next_item + 1 + i as u64;
        }
        self.commit(vec![Op::Audit {
            record_id,
            report,
            plan: plan.clone(),
        }])?;
        Ok(plan)
    }

    pub fn latest_audit(&self, record_id: u64) -> Option<&AuditReport> {
        self.state.audits.get(&record_id).and_then(|a| a.last())
    }

    pub fn audits(&self, record_id: u64) -> &[AuditReport] {
        self.state.audits.get(&record_id).map_or(&[], Vec::as_slice)
    }

    pub fn plan(&self, record_id: u64) -> Option<&RemediationPlan> {
        self.state.plans.get(&record_id)
    }

    fn plan_of_item(&self, item_id: u64) -> Option<u64> {
        self.state
            .plans
            .iter()
            .find(|(_, p)| p.item(item_id).is_some())
            .map(|(id, _)| *id)
    }

    pub fn update_plan_item(&mut self, item_id: u64, patch: &PlanItemPatch) -> Result<PlanItem, InventoryError> {
        let record_id = self.plan_of_item(item_id).ok_or(InventoryError::PlanItemNotFound(item_id))?;
        let mut plan = self.state.plans[&record_id].clone();
        if let Some(owner) = &patch.owner {
            plan.set_owner(item_id, &required("owner", owner)?)?;
        }
        if let Some(status) = patch.status {
            plan.transition(item_id, status, patch.justification.as_deref())?;
        }
        let item = plan.item(item_id).expect("item exists").clone();
        self.commit(vec![Op::PlanItem {
            record_id,
            item: item.clone(),
        }])?;
        Ok(item)
    }

    pub fn summary(&self, today: Timestamp) -> Summary {
        let mut counts: BTreeMap<(Category, Tier, RecordStatus), u64> = BTreeMap::new();
        let mut active_by_category: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
        let mut validation: BTreeMap<ValidationState, u64> =
            ValidationState::ALL.iter().map(|v| (*v, 0)).collect();
        for r in self.records() {
            *counts.entry((r.category, r.tier, r.status)).or_default() += 1;
            if r.is_active() {
                *active_by_category.entry(r.category).or_default() += 1;
                *validation.entry(validation_due(r, today)).or_default() += 1;
            }
        }
        let mut rows = Vec::new();
        for category in Category::ALL {
            for tier in Tier::ALL {
                for status in RecordStatus::ALL {
                    rows.push(CountRow {
                        category,
                        tier,
                        status,
                        count: counts.get(&(category, tier, status)).copied().unwrap_or(0),
                    });
                }
            }
        }
        let compliance = self
            .records()
            .filter_map(|r| {
                self.latest_audit(r.record_id).map(|a| ComplianceRow {
                    record_id: r.record_id,
                    name: r.name.clone(),
                    compliance_score: a.compliance_score,
                    audited_at: a.audited_at,
                })
            })
            .collect();
        Summary {
            total_records: self.len() as u64,
            active_by_category,
            by_category_tier_status: rows,
            validation,
            compliance,
        }
    }
}
