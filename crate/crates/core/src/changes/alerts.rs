//! Alert triggers: which detected changes need independent sign-off.

use serde::{Deserialize, Serialize};

use crate::formula::{parse_formula, precedents};
use crate::workbook::{Cell, CellValue, Workbook};

use super::diff::{ChangeKind, CellChange, WorkbookDiff};

pub const PCT_EPSILON: f64 = 1e-12;

pub const TEMPLATE_SHEETS: [&str; 3] = ["Documentation", "Change_Log", "Review_Log"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    FormulaChangeAny,
    FormulaChangeInLocked,
    ValueChangeOverPct { threshold: f64 },
    StructuralChange,
    NewExternalReference,
    TemplateSheetModified,
}

impl Trigger {
    pub fn id(&self) -> &'static str {
        match self {
            Trigger::FormulaChangeAny => "formula_change_any",
            Trigger::FormulaChangeInLocked => "formula_change_in_locked",
            Trigger::ValueChangeOverPct { .. } => "value_change_over_pct",
            Trigger::StructuralChange => "structural_change",
            Trigger::NewExternalReference => "new_external_reference",
            Trigger::TemplateSheetModified => "template_sheet_modified",
        }
    }

    fn rank(&self) -> usize {
        TRIGGER_IDS.iter().position(|id| *id == self.id()).unwrap_or(usize::MAX)
    }
}

pub const TRIGGER_IDS: [&str; 6] = [
    "formula_change_any",
    "formula_change_in_locked",
    "value_change_over_pct",
    "structural_change",
    "new_external_reference",
    "template_sheet_modified",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlertRuleSet {
    pub triggers: Vec<Trigger>,
    /// Sheets whose every change fires `template_sheet_modified`.
    #[serde(default = "default_template_sheets")]
    pub template_sheets: Vec<String>,
}

fn default_template_sheets() -> Vec<String> {
    TEMPLATE_SHEETS.iter().map(|s| s.to_string()).collect()
}

impl Default for AlertRuleSet {
    /// Everything except `formula_change_any`, with a 10% value threshold.
    fn default() -> Self {
        AlertRuleSet {
            triggers: vec![
                Trigger::FormulaChangeInLocked,
                Trigger::ValueChangeOverPct { threshold: 0.1 },
                Trigger::StructuralChange,
                Trigger::NewExternalReference,
                Trigger::TemplateSheetModified,
            ],
            template_sheets: default_template_sheets(),
        }
    }
}

impl AlertRuleSet {
    pub fn none() -> Self {
        AlertRuleSet {
            triggers: Vec::new(),
            template_sheets: default_template_sheets(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let rules: AlertRuleSet = serde_json::from_str(text).map_err(|e| e.to_string())?;
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), String> {
        for t in &self.triggers {
            if let Trigger::ValueChangeOverPct { threshold } = t {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return Err(format!("value_change_over_pct threshold must be positive, got {threshold}"));
                }
            }
        }
        Ok(())
    }
}

fn external(cell: Option<&Cell>, sheet: &str) -> bool {
    cell.and_then(|c| c.formula.as_deref())
        .and_then(|f| parse_formula(f).ok())
        .is_some_and(|ast| precedents(&ast, sheet).has_external_ref)
}

fn formula_edit(c: &CellChange) -> bool {
    match c.kind {
        ChangeKind::FormulaChanged => true,
        ChangeKind::CellAdded => c.after.as_ref().is_some_and(Cell::has_formula),
        ChangeKind::CellRemoved => c.before.as_ref().is_some_and(Cell::has_formula),
        _ => false,
    }
}

fn numeric(cell: Option<&Cell>) -> Option<f64> {
    match cell.map(|c| &c.value) {
        Some(CellValue::Number(n)) => Some(*n),
        _ => None,
    }
}

fn fires(trigger: &Trigger, d: &WorkbookDiff, old: &Workbook, templates: &[String]) -> bool {
    match trigger {
        Trigger::FormulaChangeAny => d.changes.iter().any(formula_edit),
        Trigger::FormulaChangeInLocked => d.changes.iter().any(|c| {
            c.kind == ChangeKind::FormulaChanged
                && c.before.as_ref().is_some_and(|b| b.locked)
                && old.sheet(&c.sheet).is_some_and(|s| s.protection_enabled)
        }),
        Trigger::ValueChangeOverPct { threshold } => d.changes.iter().any(|c| {
            match (numeric(c.before.as_ref()), numeric(c.after.as_ref())) {
                (Some(b), Some(a)) if a != b => (a - b).abs() / b.abs().max(PCT_EPSILON) > *threshold,
                _ => false,
            }
        }),
        Trigger::StructuralChange => d.structural,
        Trigger::NewExternalReference => d.changes.iter().any(|c| {
            matches!(c.kind, ChangeKind::FormulaChanged | ChangeKind::CellAdded)
                && external(c.after.as_ref(), &c.sheet)
                && !external(c.before.as_ref(), &c.sheet)
        }),
        Trigger::TemplateSheetModified => d
            .touched_sheets()
            .iter()
            .any(|s| templates.iter().any(|t| t.eq_ignore_ascii_case(s))),
    }
}

/// Ids of the triggers that fire, in catalogue order without repeats.
pub fn apply_alert_rules(d: &WorkbookDiff, old: &Workbook, rules: &AlertRuleSet) -> Vec<String> {
    let mut hits: Vec<&Trigger> = rules
        .triggers
        .iter()
        .filter(|t| fires(t, d, old, &rules.template_sheets))
        .collect();
    hits.sort_by_key(|t| t.rank());
    let mut ids: Vec<String> = hits.iter().map(|t| t.id().to_string()).collect();
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::changes::diff::diff;
    use crate::workbook::{a1_to_addr, Sheet};

    fn book(protected: bool, cells: &[(&str, Cell)]) -> Workbook {
        let mut s = Sheet::new("S");
        s.protection_enabled = protected;
        for (a, c) in cells {
            s.set(a1_to_addr(a).unwrap(), c.clone());
        }
        let mut wb = Workbook::new("w");
        wb.sheets.push(s);
        wb
    }

    fn only(t: Trigger) -> AlertRuleSet {
        AlertRuleSet {
            triggers: vec![t],
            ..AlertRuleSet::none()
        }
    }

    #[test]
    fn value_change_does_not_fire_formula_rule() {
        let a = book(false, &[("A1", Cell::number(5.0))]);
        let b = book(false, &[("A1", Cell::number(6.0))]);
        assert!(apply_alert_rules(&diff(&a, &b), &a, &only(Trigger::FormulaChangeAny)).is_empty());
    }

    #[test]
    fn locked_formula_under_protection() {
        let f = |text: &str| Cell::formula(text, CellValue::Number(10.0));
        let a = book(true, &[("B1", f("A1*2"))]);
        let b = book(true, &[("B1", f("A1*3"))]);
        let rules = only(Trigger::FormulaChangeInLocked);
        assert_eq!(apply_alert_rules(&diff(&a, &b), &a, &rules), ["formula_change_in_locked"]);
        // protection off, or the cell unlocked: no alert
        let a2 = book(false, &[("B1", f("A1*2"))]);
        assert!(apply_alert_rules(&diff(&a2, &b), &a2, &rules).is_empty());
        let a3 = book(true, &[("B1", f("A1*2").unlocked())]);
        assert!(apply_alert_rules(&diff(&a3, &b), &a3, &rules).is_empty());
    }

    #[test]
    fn percentage_threshold() {
        let rules = only(Trigger::ValueChangeOverPct { threshold: 0.1 });
        let run = |x: f64, y: f64| {
            let a = book(false, &[("A1", Cell::number(x))]);
            let b = book(false, &[("A1", Cell::number(y))]);
            apply_alert_rules(&diff(&a, &b), &a, &rules)
        };
        assert_eq!(run(100.0, 120.0), ["value_change_over_pct"]);
        assert!(run(100.0, 110.0).is_empty());
        assert!(run(100.0, 105.0).is_empty());
        assert_eq!(run(0.0, 1e-9), ["value_change_over_pct"]);
        assert_eq!(run(-50.0, -60.0), ["value_change_over_pct"]);
    }

    #[test]
    fn external_reference_must_be_new() {
        let f = |text: &str| Cell::formula(text, CellValue::Number(1.0));
        let rules = only(Trigger::NewExternalReference);
        let a = book(false, &[("A1", f("B1"))]);
        let b = book(false, &[("A1", f("[Budget.xlsx]Sheet1!B1"))]);
        assert_eq!(apply_alert_rules(&diff(&a, &b), &a, &rules), ["new_external_reference"]);
        let c = book(false, &[("A1", f("[Budget.xlsx]Sheet1!B1*2"))]);
        assert!(apply_alert_rules(&diff(&b, &c), &b, &rules).is_empty());
    }

    #[test]
    fn catalogue_order_and_json_shape() {
        let rules: AlertRuleSet = AlertRuleSet::from_json(
            r#"{"triggers":["structural_change",{"value_change_over_pct":{"threshold":0.05}},"formula_change_any"]}"#,
        )
        .unwrap();
        let a = book(false, &[("A1", Cell::number(1.0))]);
        let b = book(false, &[("A1", Cell::number(2.0)), ("B1", Cell::formula("A1", CellValue::Number(2.0)))]);
        assert_eq!(
            apply_alert_rules(&diff(&a, &b), &a, &rules),
            ["formula_change_any", "value_change_over_pct", "structural_change"]
        );
        assert!(AlertRuleSet::from_json(r#"{"triggers":[{"value_change_over_pct":{"threshold":0}}]}"#).is_err());
        assert!(AlertRuleSet::from_json(r#"{"triggers":["nonsense"]}"#).is_err());
    }

    #[test]
    fn template_sheet_edits() {
        let mut a = Workbook::new("w");
        a.sheets.push(Sheet::new("change_log"));
        let mut b = a.clone();
        b.sheets[0].set(a1_to_addr("A2").unwrap(), Cell::text("2024-01-01"));
        let rules = only(Trigger::TemplateSheetModified);
        assert_eq!(apply_alert_rules(&diff(&a, &b), &a, &rules), ["template_sheet_modified"]);
    }
}
