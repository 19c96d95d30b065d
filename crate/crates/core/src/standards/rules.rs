//! The DS rule catalogue. Each rule reads a prepared [`RuleInput`] and
//! returns its findings in any order; the auditor sorts.

use std::collections::BTreeSet;
use std::path::Path;

use crate::docsheet::DocTemplate;
use crate::formula::ReferenceIndex;
use crate::integrity::{Finding, Severity};
use crate::inventory::archive::check_archive_name;
use crate::workbook::{column_letters, CellAddr, CellKey, CellValue, Sheet, SheetPurpose, Workbook};

use super::config::*;
use super::AuditContext;

pub(crate) struct RuleInput<'a> {
    pub wb: &'a Workbook,
    pub cfg: &'a RuleConfig,
    pub ctx: &'a AuditContext,
    pub doc: Option<DocTemplate>,
    pub refs: ReferenceIndex,
    pub checks: BTreeSet<CellKey>,
}

impl RuleInput<'_> {
    fn is_template_sheet(&self, name: &str) -> bool {
        [
            &self.cfg.documentation_sheet,
            &self.cfg.change_log_sheet,
            &self.cfg.review_log_sheet,
        ]
        .iter()
        .any(|t| t.eq_ignore_ascii_case(name))
    }
}

/// Populated cells inside named ranges whose name starts with `prefix`
/// (case-insensitive).
pub fn check_cells(wb: &Workbook, prefix: &str) -> BTreeSet<CellKey> {
    let prefix = prefix.to_ascii_uppercase();
    let mut out = BTreeSet::new();
    for (name, range) in &wb.named_ranges {
        if !name.to_ascii_uppercase().starts_with(&prefix) {
            continue;
        }
        let Some(sheet) = wb.sheet(&range.sheet) else {
            continue;
        };
        for addr in sheet.cells.keys().filter(|a| range.contains(**a)) {
            out.insert(CellKey::new(sheet.name.clone(), *addr));
        }
    }
    out
}

fn finding(rule: &str, sheet: &str, addr: Option<CellAddr>, message: String) -> Finding {
    let severity = rule_info(rule).map_or(Severity::Medium, |r| r.severity);
    Finding::new(rule, severity, sheet, addr, message)
}

pub(crate) fn documentation(input: &RuleInput<'_>) -> Vec<Finding> {
    let cfg = input.cfg;
    let (Some(sheet), Some(doc)) = (input.wb.sheet(&cfg.documentation_sheet), &input.doc) else {
        return vec![finding(
            DS_DOC,
            "",
            None,
            format!("documentation sheet {:?} is missing", cfg.documentation_sheet),
        )];
    };
    let mut out = Vec::new();
    for label in &cfg.required_labels {
        match doc.labels.get(&label.to_ascii_lowercase()) {
            None => out.push(finding(
                DS_DOC,
                &sheet.name,
                None,
                format!("documentation label {label:?} is missing"),
            )),
            Some((row, value)) if value.is_empty() => out.push(finding(
                DS_DOC,
                &sheet.name,
                Some(CellAddr { col: 2, row: *row }),
                format!("documentation label {label:?} has no value"),
            )),
            Some(_) => {}
        }
    }
    out
}

// A cell the user is expected to fill in: a non-text constant, or an
// unlocked cell without a formula.
fn is_input_value(cell: &crate::workbook::Cell) -> bool {
    cell.formula.is_none()
        && (!cell.locked || matches!(cell.value, CellValue::Number(_) | CellValue::Bool(_)))
}

fn marker_text(text: &str) -> String {
    text.trim().trim_end_matches(':').trim().to_ascii_lowercase()
}

pub(crate) fn labelling(input: &RuleInput<'_>) -> Vec<Finding> {
    let header_row = input.cfg.header_row;
    let mut out = Vec::new();
    for sheet in input
        .wb
        .sheets
        .iter()
        .filter(|s| s.declared_purpose == SheetPurpose::Input)
    {
        let cols: BTreeSet<u32> = sheet
            .cells
            .iter()
            .filter(|(a, c)| a.row > header_row && is_input_value(c))
            .map(|(a, _)| a.col)
            .collect();
        for col in cols {
            let header = CellAddr { col, row: header_row };
            if sheet.text_at(header).is_none_or(str::is_empty) {
                out.push(finding(
                    DS_LAB,
                    &sheet.name,
                    Some(header),
                    format!("input column {} has no header label in row {header_row}", column_letters(col)),
                ));
            }
        }
        if let Some(marker) = &input.cfg.units_marker {
            let wanted = marker_text(marker);
            let found = sheet.cells.iter().any(|(a, c)| {
                (a.col == 1 || a.row == header_row)
                    && c.value.as_text().is_some_and(|t| marker_text(t) == wanted)
            });
            if !found {
                out.push(finding(
                    DS_LAB,
                    &sheet.name,
                    None,
                    format!("no {marker:?} row or column marks units of measure"),
                ));
            }
        }
    }
    out
}

fn readers_elsewhere<'a>(refs: &'a ReferenceIndex, key: &CellKey) -> Vec<&'a CellKey> {
    refs.readers_of(key)
        .map(|readers| readers.iter().filter(|r| r.sheet != key.sheet).collect())
        .unwrap_or_default()
}

pub(crate) fn separation(input: &RuleInput<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for sheet in &input.wb.sheets {
        if input.is_template_sheet(&sheet.name)
            || matches!(sheet.declared_purpose, SheetPurpose::Documentation | SheetPurpose::Log)
        {
            continue;
        }
        let is_check = |addr: &CellAddr| input.checks.contains(&CellKey::new(sheet.name.clone(), *addr));
        match sheet.declared_purpose {
            SheetPurpose::Undeclared => out.push(finding(
                DS_SEP,
                &sheet.name,
                None,
                "sheet has no declared purpose in the documentation sheet".into(),
            )),
            SheetPurpose::Input => {
                for (addr, _) in sheet.cells.iter().filter(|(a, c)| c.has_formula() && !is_check(a)) {
                    out.push(finding(DS_SEP, &sheet.name, Some(*addr), "formula on an input sheet".into()));
                }
            }
            SheetPurpose::Calculation => {
                for (addr, _) in sheet.cells.iter().filter(|(a, c)| {
                    c.formula.is_none()
                        && !is_check(a)
                        && !matches!(c.value, CellValue::Text(_) | CellValue::Blank)
                }) {
                    out.push(finding(
                        DS_SEP,
                        &sheet.name,
                        Some(*addr),
                        "hard-coded value on a calculation sheet".into(),
                    ));
                }
            }
            SheetPurpose::Output => {
                for addr in sheet.cells.keys() {
                    let key = CellKey::new(sheet.name.clone(), *addr);
                    let readers = readers_elsewhere(&input.refs, &key);
                    if readers.is_empty() {
                        continue;
                    }
                    let listed: Vec<String> = readers.iter().take(5).map(|k| k.to_string()).collect();
                    out.push(
                        finding(
                            DS_SEP,
                            &sheet.name,
                            Some(*addr),
                            "output cell is read by formulas on other sheets".into(),
                        )
                        .with_evidence(listed.join(", ")),
                    );
                }
            }
            SheetPurpose::Documentation | SheetPurpose::Log => {}
        }
    }
    out
}

pub(crate) fn locking(input: &RuleInput<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for sheet in &input.wb.sheets {
        let formulas: Vec<(&CellAddr, &crate::workbook::Cell)> =
            sheet.cells.iter().filter(|(_, c)| c.has_formula()).collect();
        if formulas.is_empty() {
            continue;
        }
        if !sheet.protection_enabled {
            out.push(finding(
                DS_LOCK,
                &sheet.name,
                None,
                format!("sheet protection is off on a sheet with {} formula cell(s)", formulas.len()),
            ));
        }
        for (addr, _) in formulas.iter().filter(|(_, c)| !c.locked) {
            out.push(finding(DS_LOCK, &sheet.name, Some(**addr), "formula cell is unlocked".into()));
        }
    }
    out
}

pub(crate) fn check_cells_present(input: &RuleInput<'_>) -> Vec<Finding> {
    if !input.checks.is_empty() {
        return Vec::new();
    }
    vec![finding(
        DS_CHK,
        "",
        None,
        format!(
            "no check cells: no named range starting with {:?} covers a populated cell",
            input.cfg.check_prefix
        ),
    )]
}

fn header_row(sheet: &Sheet, width: u32) -> Vec<String> {
    let last = sheet
        .cells
        .keys()
        .filter(|a| a.row == 1)
        .map(|a| a.col)
        .max()
        .unwrap_or(0)
        .max(width);
    (1..=last)
        .map(|col| {
            sheet
                .get(CellAddr { col, row: 1 })
                .map(|c| match &c.value {
                    CellValue::Text(t) => t.trim().to_string(),
                    CellValue::Blank => String::new(),
                    other => other.to_string(),
                })
                .unwrap_or_default()
        })
        .collect()
}

fn log_template(input: &RuleInput<'_>, rule: &str, name: &str, headers: &[String]) -> Vec<Finding> {
    let Some(sheet) = input.wb.sheet(name) else {
        return vec![finding(rule, "", None, format!("{name:?} sheet is missing"))];
    };
    let found = header_row(sheet, headers.len() as u32);
    if found == headers {
        return Vec::new();
    }
    vec![finding(
        rule,
        &sheet.name,
        Some(CellAddr { col: 1, row: 1 }),
        "header row does not match the template".into(),
    )
    .with_evidence(format!("expected {}; found {}", headers.join(" | "), found.join(" | ")))]
}

pub(crate) fn change_log(input: &RuleInput<'_>) -> Vec<Finding> {
    log_template(input, DS_LOG_CHANGE, &input.cfg.change_log_sheet, &input.cfg.change_log_headers)
}

pub(crate) fn review_log(input: &RuleInput<'_>) -> Vec<Finding> {
    log_template(input, DS_LOG_REVIEW, &input.cfg.review_log_sheet, &input.cfg.review_log_headers)
}

pub(crate) fn transparency(input: &RuleInput<'_>) -> Vec<Finding> {
    let empty = DocTemplate::default();
    let doc = input.doc.as_ref().unwrap_or(&empty);
    let mut out = Vec::new();
    for sheet in &input.wb.sheets {
        if sheet.hidden && !doc.documents_sheet(&sheet.name) {
            out.push(finding(DS_TRA, &sheet.name, None, "hidden sheet is not documented".into()));
        }
        for &row in sheet.hidden_rows.iter().filter(|r| !doc.documents_row(&sheet.name, **r)) {
            out.push(finding(
                DS_TRA,
                &sheet.name,
                Some(CellAddr { col: 1, row }),
                format!("hidden row {row} is not documented"),
            ));
        }
        for &col in sheet.hidden_cols.iter().filter(|c| !doc.documents_col(&sheet.name, **c)) {
            out.push(finding(
                DS_TRA,
                &sheet.name,
                Some(CellAddr { col, row: 1 }),
                format!("hidden column {} is not documented", column_letters(col)),
            ));
        }
    }
    out
}

pub(crate) fn security(input: &RuleInput<'_>) -> Vec<Finding> {
    if input.wb.security.encrypted {
        return Vec::new();
    }
    let restricted = input.ctx.location.as_deref().is_some_and(|loc| {
        input
            .cfg
            .restricted_paths
            .iter()
            .any(|prefix| Path::new(loc).starts_with(prefix))
    });
    if restricted {
        return Vec::new();
    }
    let evidence = match &input.ctx.location {
        Some(loc) => format!("location {loc}"),
        None => "location unknown".to_string(),
    };
    vec![finding(
        DS_SEC,
        "",
        None,
        "workbook is neither password-protected nor stored under a restricted path".into(),
    )
    .with_evidence(evidence)]
}

pub(crate) fn archive_name(input: &RuleInput<'_>) -> Vec<Finding> {
    match &input.ctx.file_name {
        Some(name) => check_archive_name(name, &input.cfg.archive()).err().into_iter().collect(),
        None => Vec::new(),
    }
}
