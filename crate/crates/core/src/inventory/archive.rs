//! Archive naming convention: `<base>_v<major>.<minor>_<YYYYMMDD>.<ext>`.

use chrono::NaiveDate;
use regex::Regex;

use crate::integrity::{Finding, Severity};

pub const ARC_RULE: &str = "ARC-01";

pub const DEFAULT_ARCHIVE_PATTERN: &str =
    r"^(?P<base>.+)_v(?P<major>\d+)\.(?P<minor>\d+)_(?P<date>\d{8})\.(?P<ext>[A-Za-z0-9]+)$";
const DEFAULT_DISPLAY: &str = "<base>_v<major>.<minor>_<YYYYMMDD>.<ext>";

/// A compiled naming pattern. A `date` capture group, if present, must hold
/// a real calendar date in YYYYMMDD form.
#[derive(Debug, Clone)]
pub struct ArchivePattern {
    regex: Regex,
    display: String,
}

impl ArchivePattern {
    pub fn new(pattern: &str) -> Result<Self, regex::Error> {
        let display = if pattern == DEFAULT_ARCHIVE_PATTERN {
            DEFAULT_DISPLAY.to_string()
        } else {
            pattern.to_string()
        };
        Ok(ArchivePattern {
            regex: Regex::new(pattern)?,
            display,
        })
    }

    pub fn display(&self) -> &str {
        &self.display
    }
}

impl Default for ArchivePattern {
    fn default() -> Self {
        ArchivePattern::new(DEFAULT_ARCHIVE_PATTERN).expect("default pattern compiles")
    }
}

/// Checks the final path component of `filename`.
pub fn check_archive_name(filename: &str, pattern: &ArchivePattern) -> Result<(), Finding> {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    let problem = match pattern.regex.captures(base) {
        None => Some("name does not match the pattern".to_string()),
        Some(caps) => caps.name("date").and_then(|d| {
            NaiveDate::parse_from_str(d.as_str(), "%Y%m%d")
                .err()
                .map(|_| format!("{} is not a valid YYYYMMDD date", d.as_str()))
        }),
    };
    match problem {
        None => Ok(()),
        Some(reason) => Err(Finding::new(
            ARC_RULE,
            Severity::Low,
            "",
            None,
            format!("file name {base:?} does not follow {}", pattern.display()),
        )
        .with_evidence(reason)),
    }
}
