//! Design-standards audit: the DS rule catalogue plus the integrity checks,
//! compliance scoring, remediation plans and the QA re-check.

mod classify;
mod config;
mod plan;
mod rules;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::docsheet::read_doc_template;
use crate::formula::referenced_by_parsed;
use crate::integrity::{run_checks, Analysis, Finding, Severity, INTEGRITY_RULES};
use crate::inventory::archive::ARC_RULE;
use crate::timefmt::{self, Timestamp};
use crate::workbook::{SourceFormat, Workbook};

pub use classify::{classify_cells, CellClass};
pub use config::*;
pub use plan::{
    build_plan, build_plan_with, qa_recheck, EffortConfig, PlanError, PlanItem, PlanStatus, QaReport,
    RemediationPlan, UNASSIGNED,
};
pub use rules::check_cells;

pub const SCHEMA_VERSION: u32 = 1;

/// Facts about the audited file that are not in the workbook itself. The
/// timestamp is injected so that audits are pure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditContext {
    pub audited_at: Timestamp,
    pub file_name: Option<String>,
    /// Directory or path the file is stored under, for DS-SEC-01.
    pub location: Option<String>,
}

impl AuditContext {
    pub fn at(audited_at: Timestamp) -> Self {
        AuditContext {
            audited_at,
            file_name: None,
            location: None,
        }
    }

    pub fn with_file_name(mut self, name: impl Into<String>) -> Self {
        self.file_name = Some(name.into());
        self
    }

    pub fn with_location(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditWarning {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub workbook_name: String,
    #[serde(with = "timefmt")]
    pub audited_at: Timestamp,
    pub findings: Vec<Finding>,
    pub rules_passed: Vec<String>,
    pub rules_failed: Vec<String>,
    pub rules_not_applicable: Vec<String>,
    /// passed / (passed + failed); 1 when no rule applies.
    pub compliance_score: f64,
    /// Formulas the analysis could not fully follow.
    pub warnings: Vec<AuditWarning>,
}

impl AuditReport {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn count_at_or_above(&self, threshold: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity >= threshold).count()
    }

    pub fn score_fraction(&self) -> (usize, usize) {
        let passed = self.rules_passed.len();
        (passed, passed + self.rules_failed.len())
    }
}

fn applicable(wb: &Workbook, ctx: &AuditContext, rule: &str) -> bool {
    if rule == ARC_RULE && ctx.file_name.is_none() {
        return false;
    }
    if wb.source_format == SourceFormat::EncryptedOpaque {
        return rule == DS_SEC || rule == ARC_RULE;
    }
    true
}

type DsRule = fn(&rules::RuleInput<'_>) -> Vec<Finding>;

pub fn audit(wb: &Workbook, cfg: &RuleConfig, ctx: &AuditContext) -> AuditReport {
    let analysis = Analysis::new(wb);
    let refs = referenced_by_parsed(wb, &analysis.formulas, cfg.expansion_cap);
    let mut warnings: Vec<AuditWarning> = refs
        .unparsable
        .iter()
        .map(|u| AuditWarning {
            location: u.cell.to_string(),
            message: format!("formula {:?} could not be parsed: {}", u.formula, u.error),
        })
        .collect();
    warnings.extend(refs.opaque.iter().map(|k| AuditWarning {
        location: k.to_string(),
        message: "array constant or table reference not followed".into(),
    }));
    warnings.extend(refs.truncated.iter().map(|k| AuditWarning {
        location: k.to_string(),
        message: format!("precedent expansion truncated at {} cells", cfg.expansion_cap),
    }));

    let input = rules::RuleInput {
        wb,
        cfg,
        ctx,
        doc: read_doc_template(wb, &cfg.documentation_sheet),
        checks: check_cells(wb, &cfg.check_prefix),
        refs,
    };
    let catalogue = rule_catalogue();
    let runs: BTreeSet<&str> = catalogue
        .iter()
        .map(|r| r.id)
        .filter(|id| cfg.is_enabled(id) && applicable(wb, ctx, id))
        .collect();
    let ds_rules: [(&str, DsRule); 10] = [
        (DS_DOC, rules::documentation),
        (DS_LAB, rules::labelling),
        (DS_SEP, rules::separation),
        (DS_LOCK, rules::locking),
        (DS_CHK, rules::check_cells_present),
        (DS_LOG_CHANGE, rules::change_log),
        (DS_LOG_REVIEW, rules::review_log),
        (DS_TRA, rules::transparency),
        (DS_SEC, rules::security),
        (ARC_RULE, rules::archive_name),
    ];
    let mut findings = Vec::new();
    for (id, rule) in ds_rules {
        if runs.contains(id) {
            findings.extend(rule(&input));
        }
    }
    let integrity: BTreeSet<String> = INTEGRITY_RULES
        .iter()
        .filter(|id| runs.contains(*id))
        .map(|id| id.to_string())
        .collect();
    if !integrity.is_empty() {
        findings.extend(run_checks(&analysis, &integrity, &cfg.integrity()));
    }
    findings.sort();

    let failed: BTreeSet<&str> = findings.iter().map(|f| f.rule_id.as_str()).collect();
    let in_order = |pred: &dyn Fn(&str) -> bool| -> Vec<String> {
        catalogue
            .iter()
            .map(|r| r.id)
            .filter(|id| pred(id))
            .map(str::to_string)
            .collect()
    };
    let rules_passed = in_order(&|id| runs.contains(id) && !failed.contains(id));
    let rules_failed = in_order(&|id| failed.contains(id));
    let rules_not_applicable = in_order(&|id| cfg.is_enabled(id) && !runs.contains(id));
    let total = rules_passed.len() + rules_failed.len();
    let compliance_score = if total == 0 {
        1.0
    } else {
        rules_passed.len() as f64 / total as f64
    };
    AuditReport {
        schema_version: SCHEMA_VERSION,
        workbook_name: wb.name.clone(),
        audited_at: ctx.audited_at,
        findings,
        rules_passed,
        rules_failed,
        rules_not_applicable,
        compliance_score,
        warnings,
    }
}
