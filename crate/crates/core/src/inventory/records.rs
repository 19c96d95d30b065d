use std::fmt;

use chrono::Days;
use serde::{Deserialize, Serialize};

use crate::timefmt::{self, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Financial,
    Operational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Critical,
    Significant,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Active,
    Retired,
    Replaced,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::Financial, Category::Operational];
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Critical, Tier::Significant, Tier::Standard];
}

impl RecordStatus {
    pub const ALL: [RecordStatus; 3] = [RecordStatus::Active, RecordStatus::Retired, RecordStatus::Replaced];
}

macro_rules! display_via_serde {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = serde_json::to_value(self).expect("unit enum");
                f.write_str(v.as_str().unwrap_or_default())
            }
        }
    )*};
}

display_via_serde!(Category, Tier, RecordStatus, ValidationState);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRequirementSet {
    pub inventory_listed: bool,
    pub design_standards: bool,
    pub independent_validation: bool,
    pub checking_controls: bool,
    pub change_logs: bool,
    pub change_monitoring: bool,
    pub security: bool,
    pub archiving: bool,
}

impl ControlRequirementSet {
    pub fn count(&self) -> usize {
        self.as_array().iter().filter(|(_, on)| *on).count()
    }

    pub fn as_array(&self) -> [(&'static str, bool); 8] {
        [
            ("inventory_listed", self.inventory_listed),
            ("design_standards", self.design_standards),
            ("independent_validation", self.independent_validation),
            ("checking_controls", self.checking_controls),
            ("change_logs", self.change_logs),
            ("change_monitoring", self.change_monitoring),
            ("security", self.security),
            ("archiving", self.archiving),
        ]
    }
}

/// The tier table. Category does not change the row; it only segments
/// reporting.
pub fn required_controls(_category: Category, tier: Tier) -> ControlRequirementSet {
    let all = tier != Tier::Standard;
    ControlRequirementSet {
        inventory_listed: true,
        design_standards: all,
        independent_validation: all,
        checking_controls: all,
        change_logs: all,
        change_monitoring: tier == Tier::Critical,
        security: all,
        archiving: true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EucRecord {
    pub record_id: u64,
    pub name: String,
    pub owner: String,
    pub line_manager: String,
    pub business_process: String,
    pub category: Category,
    pub tier: Tier,
    pub file_key: Option<String>,
    #[serde(with = "timefmt::option", default)]
    pub last_validated_at: Option<Timestamp>,
    pub validation_frequency_days: u32,
    pub status: RecordStatus,
    #[serde(default)]
    pub status_note: Option<String>,
    #[serde(with = "timefmt")]
    pub created_at: Timestamp,
    #[serde(with = "timefmt")]
    pub updated_at: Timestamp,
    pub created_by: String,
    pub updated_by: String,
}

impl EucRecord {
    pub fn required_controls(&self) -> ControlRequirementSet {
        required_controls(self.category, self.tier)
    }

    pub fn is_active(&self) -> bool {
        self.status == RecordStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationState {
    NeverValidated,
    Due,
    Overdue,
    Current,
}

impl ValidationState {
    pub const ALL: [ValidationState; 4] = [
        ValidationState::NeverValidated,
        ValidationState::Due,
        ValidationState::Overdue,
        ValidationState::Current,
    ];
}

pub const DUE_WINDOW_DAYS: u32 = 14;

/// Compares calendar dates (UTC). The deadline day itself is still due.
pub fn validation_due(rec: &EucRecord, today: Timestamp) -> ValidationState {
    validation_due_with(rec, today, DUE_WINDOW_DAYS)
}

pub fn validation_due_with(rec: &EucRecord, today: Timestamp, window_days: u32) -> ValidationState {
    let Some(last) = rec.last_validated_at else {
        return ValidationState::NeverValidated;
    };
    let today = today.date_naive();
    let Some(deadline) = last
        .date_naive()
        .checked_add_days(Days::new(rec.validation_frequency_days.into()))
    else {
        return ValidationState::Current;
    };
    if today > deadline {
        ValidationState::Overdue
    } else if deadline
        .checked_sub_days(Days::new(window_days.into()))
        .is_none_or(|start| today >= start)
    {
        ValidationState::Due
    } else {
        ValidationState::Current
    }
}
