use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docsheet::DEFAULT_DOC_SHEET;
use crate::formula::DEFAULT_EXPANSION_CAP;
use crate::integrity::{IntegrityConfig, Severity, DEFAULT_EXEMPT_CONSTANTS, INTEGRITY_RULES};
use crate::inventory::archive::{ArchivePattern, ARC_RULE, DEFAULT_ARCHIVE_PATTERN};

pub const DS_DOC: &str = "DS-DOC-01";
pub const DS_LAB: &str = "DS-LAB-01";
pub const DS_SEP: &str = "DS-SEP-01";
pub const DS_LOCK: &str = "DS-LOCK-01";
pub const DS_CHK: &str = "DS-CHK-01";
pub const DS_LOG_CHANGE: &str = "DS-LOG-01";
pub const DS_LOG_REVIEW: &str = "DS-LOG-02";
pub const DS_TRA: &str = "DS-TRA-01";
pub const DS_SEC: &str = "DS-SEC-01";

pub const DS_RULES: [&str; 9] = [
    DS_DOC,
    DS_LAB,
    DS_SEP,
    DS_LOCK,
    DS_CHK,
    DS_LOG_CHANGE,
    DS_LOG_REVIEW,
    DS_TRA,
    DS_SEC,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RuleInfo {
    pub id: &'static str,
    pub severity: Severity,
    pub title: &'static str,
}

const CATALOGUE: [RuleInfo; 15] = [
    RuleInfo { id: DS_DOC, severity: Severity::High, title: "documentation template complete" },
    RuleInfo { id: DS_LAB, severity: Severity::Medium, title: "input columns and units labelled" },
    RuleInfo { id: DS_SEP, severity: Severity::High, title: "inputs, calculations and outputs separated" },
    RuleInfo { id: DS_LOCK, severity: Severity::High, title: "formulas locked under sheet protection" },
    RuleInfo { id: DS_CHK, severity: Severity::Medium, title: "check cells present" },
    RuleInfo { id: DS_LOG_CHANGE, severity: Severity::High, title: "change log template present" },
    RuleInfo { id: DS_LOG_REVIEW, severity: Severity::Medium, title: "review log template present" },
    RuleInfo { id: DS_TRA, severity: Severity::Low, title: "no undocumented hidden content" },
    RuleInfo { id: DS_SEC, severity: Severity::Medium, title: "file password or restricted location" },
    RuleInfo { id: ARC_RULE, severity: Severity::Low, title: "archive naming convention" },
    RuleInfo { id: INTEGRITY_RULES[0], severity: Severity::High, title: "formula consistent with its region" },
    RuleInfo { id: INTEGRITY_RULES[1], severity: Severity::High, title: "no error values" },
    RuleInfo { id: INTEGRITY_RULES[2], severity: Severity::Medium, title: "no hard-coded constants in formulas" },
    RuleInfo { id: INTEGRITY_RULES[3], severity: Severity::High, title: "no circular references" },
    RuleInfo { id: INTEGRITY_RULES[4], severity: Severity::Low, title: "no references to blank cells" },
];

/// Every rule the auditor knows, in report order.
pub fn rule_catalogue() -> &'static [RuleInfo] {
    &CATALOGUE
}

pub fn rule_info(id: &str) -> Option<&'static RuleInfo> {
    CATALOGUE.iter().find(|r| r.id == id)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed rule configuration: {0}")]
    Json(String),
    #[error("unknown rule id {0:?}")]
    UnknownRule(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub enabled: Vec<String>,
    pub documentation_sheet: String,
    pub required_labels: Vec<String>,
    /// Row holding the column headers of input sheets.
    pub header_row: u32,
    /// When set, every input sheet needs a cell with this text in column A
    /// (a units row) or in the header row (a units column).
    pub units_marker: Option<String>,
    pub change_log_sheet: String,
    pub change_log_headers: Vec<String>,
    pub review_log_sheet: String,
    pub review_log_headers: Vec<String>,
    pub check_prefix: String,
    /// Location prefixes counted as access-restricted directories.
    pub restricted_paths: Vec<String>,
    pub archive_pattern: String,
    pub exempt_constants: Vec<f64>,
    pub expansion_cap: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            enabled: CATALOGUE.iter().map(|r| r.id.to_string()).collect(),
            documentation_sheet: DEFAULT_DOC_SHEET.to_string(),
            required_labels: strings(&["Purpose", "Owner", "Version", "Last Updated"]),
            header_row: 1,
            units_marker: None,
            change_log_sheet: "Change_Log".to_string(),
            change_log_headers: strings(&["Date", "Author", "Description", "Reason", "Reviewer", "Review Date"]),
            review_log_sheet: "Review_Log".to_string(),
            review_log_headers: strings(&["Date", "Check Performed", "Result", "Reviewer"]),
            check_prefix: "CHK_".to_string(),
            restricted_paths: Vec::new(),
            archive_pattern: DEFAULT_ARCHIVE_PATTERN.to_string(),
            exempt_constants: DEFAULT_EXEMPT_CONSTANTS.to_vec(),
            expansion_cap: DEFAULT_EXPANSION_CAP,
        }
    }
}

impl RuleConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RuleConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(bad) = self.enabled.iter().find(|id| rule_info(id).is_none()) {
            return Err(ConfigError::UnknownRule(bad.clone()));
        }
        let invalid = |field, message: &str| ConfigError::Invalid {
            field,
            message: message.to_string(),
        };
        if self.header_row == 0 {
            return Err(invalid("header_row", "rows start at 1"));
        }
        for (field, name) in [
            ("documentation_sheet", &self.documentation_sheet),
            ("change_log_sheet", &self.change_log_sheet),
            ("review_log_sheet", &self.review_log_sheet),
            ("check_prefix", &self.check_prefix),
        ] {
            if name.trim().is_empty() {
                return Err(invalid(field, "must be non-empty"));
            }
        }
        if self.expansion_cap == 0 {
            return Err(invalid("expansion_cap", "must be positive"));
        }
        if self.exempt_constants.iter().any(|c| !c.is_finite()) {
            return Err(invalid("exempt_constants", "must be finite numbers"));
        }
        ArchivePattern::new(&self.archive_pattern).map_err(|e| ConfigError::Invalid {
            field: "archive_pattern",
            message: e.to_string(),
        })?;
        Ok(())
    }

    pub fn is_enabled(&self, id: &str) -> bool {
        self.enabled.iter().any(|e| e == id)
    }

    /// Keeps only the listed rules enabled.
    pub fn restricted_to(mut self, ids: &[&str]) -> Self {
        self.enabled.retain(|e| ids.contains(&e.as_str()));
        self
    }

    pub fn integrity(&self) -> IntegrityConfig {
        IntegrityConfig {
            exempt_constants: self.exempt_constants.clone(),
            expansion_cap: self.expansion_cap,
        }
    }

    pub fn archive(&self) -> ArchivePattern {
        ArchivePattern::new(&self.archive_pattern).unwrap_or_default()
    }
}
