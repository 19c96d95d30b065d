use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrity::{Finding, Severity};

use super::config::*;
use super::{audit, AuditContext, AuditReport};
use crate::inventory::archive::ARC_RULE;
use crate::workbook::Workbook;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Open,
    InProgress,
    Done,
    AcceptedRisk,
}

impl PlanStatus {
    pub const ALL: [PlanStatus; 4] = [
        PlanStatus::Open,
        PlanStatus::InProgress,
        PlanStatus::Done,
        PlanStatus::AcceptedRisk,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlanStatus::Open => "open",
            PlanStatus::InProgress => "in_progress",
            PlanStatus::Done => "done",
            PlanStatus::AcceptedRisk => "accepted_risk",
        }
    }

    /// Forward moves, plus reopening a done item.
    pub fn can_move_to(self, to: PlanStatus) -> bool {
        use PlanStatus::*;
        matches!(
            (self, to),
            (Open, InProgress)
                | (Open, Done)
                | (InProgress, Done)
                | (Done, Open)
                | (Open, AcceptedRisk)
                | (InProgress, AcceptedRisk)
        )
    }
}

impl fmt::Display for PlanStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    pub item_id: u64,
    pub finding: Finding,
    pub action_text: String,
    pub status: PlanStatus,
    pub owner: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediationPlan {
    pub schema_version: u32,
    pub workbook_name: String,
    pub items: Vec<PlanItem>,
    /// An estimate from severity weights, not a measurement.
    pub estimated_effort_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffortConfig {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
    pub info: f64,
    pub floor: f64,
    pub ceiling: f64,
}

impl Default for EffortConfig {
    fn default() -> Self {
        EffortConfig {
            high: 0.75,
            medium: 0.5,
            low: 0.25,
            info: 0.0,
            floor: 0.0,
            ceiling: 25.0,
        }
    }
}

impl EffortConfig {
    pub fn weight(&self, severity: Severity) -> f64 {
        match severity {
            Severity::High => self.high,
            Severity::Medium => self.medium,
            Severity::Low => self.low,
            Severity::Info => self.info,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan item {0} not found")]
    UnknownItem(u64),
    #[error("cannot move a plan item from {from} to {to}")]
    InvalidTransition { from: PlanStatus, to: PlanStatus },
    #[error("accepting a risk requires a justification")]
    MissingJustification,
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::UnknownItem(_) => "not-found",
            PlanError::InvalidTransition { .. } => "invalid-transition",
            PlanError::MissingJustification => "missing-justification",
        }
    }
}

fn action_for(rule_id: &str, cfg: &RuleConfig) -> String {
    match rule_id {
        DS_DOC => format!(
            "Complete the {:?} sheet with {}",
            cfg.documentation_sheet,
            cfg.required_labels.join(", ")
        ),
        DS_LAB => "Label every input column in the header row and mark units of measure".into(),
        DS_SEP => "Move content so that each sheet holds only what its declared purpose allows".into(),
        DS_LOCK => "Lock the formula cells and turn on sheet protection".into(),
        DS_CHK => format!("Add check cells (control totals or criteria tests) in a {}* named range", cfg.check_prefix),
        DS_LOG_CHANGE => format!(
            "Add the {:?} sheet with headers {}",
            cfg.change_log_sheet,
            cfg.change_log_headers.join(" | ")
        ),
        DS_LOG_REVIEW => format!(
            "Add the {:?} sheet with headers {}",
            cfg.review_log_sheet,
            cfg.review_log_headers.join(" | ")
        ),
        DS_TRA => "Unhide the content or document it with a Hidden: row in the documentation sheet".into(),
        DS_SEC => "Set a file password or move the file to a restricted directory".into(),
        ARC_RULE => "Rename the file to the archive naming convention".into(),
        "INT-01" => "Make the formula consistent with its region or document the exception".into(),
        "INT-02" => "Resolve the error value".into(),
        "INT-03" => "Move the embedded constant to a labelled input cell".into(),
        "INT-04" => "Break the circular reference".into(),
        "INT-05" => "Populate the referenced cell or correct the reference".into(),
        other => format!("Resolve {other}"),
    }
}

pub const UNASSIGNED: &str = "unassigned";

/// One open item per finding, in report order, with default action texts.
pub fn build_plan(report: &AuditReport, effort: &EffortConfig) -> RemediationPlan {
    build_plan_with(report, effort, &RuleConfig::default(), UNASSIGNED)
}

pub fn build_plan_with(
    report: &AuditReport,
    effort: &EffortConfig,
    cfg: &RuleConfig,
    owner: &str,
) -> RemediationPlan {
    let items: Vec<PlanItem> = report
        .findings
        .iter()
        .enumerate()
        .map(|(i, f)| PlanItem {
            item_id: i as u64 + 1,
            finding: f.clone(),
            action_text: format!("{} ({})", action_for(&f.rule_id, cfg), f.location()),
            status: PlanStatus::Open,
            owner: owner.to_string(),
        })
        .collect();
    let total: f64 = items.iter().map(|i| effort.weight(i.finding.severity)).sum();
    RemediationPlan {
        schema_version: super::SCHEMA_VERSION,
        workbook_name: report.workbook_name.clone(),
        estimated_effort_days: total.clamp(effort.floor, effort.ceiling.max(effort.floor)),
        items,
    }
}

impl RemediationPlan {
    pub fn item(&self, item_id: u64) -> Option<&PlanItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn transition(
        &mut self,
        item_id: u64,
        to: PlanStatus,
        justification: Option<&str>,
    ) -> Result<&PlanItem, PlanError> {
        let item = self
            .items
            .iter_mut()
            .find(|i| i.item_id == item_id)
            .ok_or(PlanError::UnknownItem(item_id))?;
        if !item.status.can_move_to(to) {
            return Err(PlanError::InvalidTransition { from: item.status, to });
        }
        if to == PlanStatus::AcceptedRisk {
            let reason = justification.map(str::trim).unwrap_or_default();
            if reason.is_empty() {
                return Err(PlanError::MissingJustification);
            }
            item.action_text.push_str("\nAccepted risk: ");
            item.action_text.push_str(reason);
        }
        item.status = to;
        Ok(item)
    }

    pub fn set_owner(&mut self, item_id: u64, owner: &str) -> Result<&PlanItem, PlanError> {
        let item = self
            .items
            .iter_mut()
            .find(|i| i.item_id == item_id)
            .ok_or(PlanError::UnknownItem(item_id))?;
        item.owner = owner.to_string();
        Ok(item)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub report: AuditReport,
    /// Items marked done whose finding the re-audit still reports.
    pub regressions: Vec<u64>,
}

/// Re-audits the remediated workbook and checks every done item.
pub fn qa_recheck(wb: &Workbook, plan: &RemediationPlan, cfg: &RuleConfig, ctx: &AuditContext) -> QaReport {
    let report = audit(wb, cfg, ctx);
    let regressions = plan
        .items
        .iter()
        .filter(|item| item.status == PlanStatus::Done)
        .filter(|item| report.findings.iter().any(|f| f.same_issue(&item.finding)))
        .map(|item| item.item_id)
        .collect();
    QaReport { report, regressions }
}
