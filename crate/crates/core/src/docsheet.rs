//! Reader for the documentation template: label/value pairs in columns A and
//! B of the documentation sheet.
//!
//! Besides the free labels (Purpose, Owner, ...) two label families carry
//! structure:
//!
//! * `Sheet: <name>` with a purpose in column B declares a sheet's purpose.
//! * `Hidden: <item>` documents a hidden sheet (`Calc`), rows (`Calc!3:4`,
//!   `Calc!3`) or columns (`Calc!C:D`, `Calc!C`). Column B holds the reason.

use std::collections::{BTreeMap, BTreeSet};

use crate::workbook::{column_index, CellAddr, CellValue, SheetPurpose, Workbook};

pub const DEFAULT_DOC_SHEET: &str = "Documentation";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum HiddenItem {
    Sheet(String),
    Rows { sheet: String, first: u32, last: u32 },
    Cols { sheet: String, first: u32, last: u32 },
}

impl HiddenItem {
    pub fn parse(text: &str) -> Option<HiddenItem> {
        let text = text.trim();
        let Some((sheet, span)) = text.rsplit_once('!') else {
            return (!text.is_empty()).then(|| HiddenItem::Sheet(unquote(text)));
        };
        let sheet = unquote(sheet);
        let (a, b) = span.split_once(':').unwrap_or((span, span));
        let (a, b) = (a.trim().trim_start_matches('$'), b.trim().trim_start_matches('$'));
        if let (Ok(first), Ok(last)) = (a.parse::<u32>(), b.parse::<u32>()) {
            return (first >= 1 && first <= last).then_some(HiddenItem::Rows { sheet, first, last });
        }
        let first = column_index(&a.to_ascii_uppercase())?;
        let last = column_index(&b.to_ascii_uppercase())?;
        (first <= last).then_some(HiddenItem::Cols { sheet, first, last })
    }

    pub fn sheet(&self) -> &str {
        match self {
            HiddenItem::Sheet(s) => s,
            HiddenItem::Rows { sheet, .. } | HiddenItem::Cols { sheet, .. } => sheet,
        }
    }
}

fn unquote(name: &str) -> String {
    let name = name.trim();
    match name.strip_prefix('\'').and_then(|n| n.strip_suffix('\'')) {
        Some(inner) => inner.replace("''", "'"),
        None => name.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocTemplate {
    /// Lower-cased label -> (row, value text). First occurrence wins.
    pub labels: BTreeMap<String, (u32, String)>,
    /// Sheet name as written -> purpose text as written.
    pub purposes: BTreeMap<String, String>,
    pub hidden: BTreeSet<HiddenItem>,
}

impl DocTemplate {
    pub fn value(&self, label: &str) -> Option<&str> {
        self.labels
            .get(&label.to_ascii_lowercase())
            .map(|(_, v)| v.as_str())
    }

    /// Whether a hidden sheet, row or column is covered by a `Hidden:` row.
    pub fn documents_sheet(&self, sheet: &str) -> bool {
        self.hidden
            .iter()
            .any(|h| matches!(h, HiddenItem::Sheet(s) if s.eq_ignore_ascii_case(sheet)))
    }

    pub fn documents_row(&self, sheet: &str, row: u32) -> bool {
        self.hidden.iter().any(|h| match h {
            HiddenItem::Rows { sheet: s, first, last } => {
                s.eq_ignore_ascii_case(sheet) && (*first..=*last).contains(&row)
            }
            _ => false,
        })
    }

    pub fn documents_col(&self, sheet: &str, col: u32) -> bool {
        self.hidden.iter().any(|h| match h {
            HiddenItem::Cols { sheet: s, first, last } => {
                s.eq_ignore_ascii_case(sheet) && (*first..=*last).contains(&col)
            }
            _ => false,
        })
    }
}

fn display(value: &CellValue) -> String {
    match value {
        CellValue::Blank => String::new(),
        CellValue::Text(t) => t.trim().to_string(),
        other => other.to_string(),
    }
}

/// Reads the template from `doc_sheet`, or `None` if the sheet is absent.
pub fn read_doc_template(wb: &Workbook, doc_sheet: &str) -> Option<DocTemplate> {
    let sheet = wb.sheet(doc_sheet)?;
    let mut doc = DocTemplate::default();
    let rows: BTreeSet<u32> = sheet.cells.keys().map(|a| a.row).collect();
    for row in rows {
        let Some(label) = sheet.get(CellAddr { col: 1, row }).map(|c| display(&c.value)) else {
            continue;
        };
        let label = label.trim_end_matches(':').trim().to_string();
        if label.is_empty() {
            continue;
        }
        let value = sheet
            .get(CellAddr { col: 2, row })
            .map(|c| display(&c.value))
            .unwrap_or_default();
        if let Some((kind, rest)) = label.split_once(':') {
            let rest = rest.trim();
            match kind.trim().to_ascii_lowercase().as_str() {
                "sheet" if !rest.is_empty() => {
                    doc.purposes.entry(unquote(rest)).or_insert(value);
                    continue;
                }
                "hidden" => {
                    if let Some(item) = HiddenItem::parse(rest) {
                        doc.hidden.insert(item);
                    }
                    continue;
                }
                _ => {}
            }
        }
        doc.labels
            .entry(label.to_ascii_lowercase())
            .or_insert((row, value));
    }
    Some(doc)
}

/// Sets each sheet's declared purpose from `Sheet:` rows of the template.
/// Returns a message per row naming an unknown sheet or purpose.
pub fn apply_declared_purposes(wb: &mut Workbook, doc_sheet: &str) -> Vec<String> {
    let Some(doc) = read_doc_template(wb, doc_sheet) else {
        return Vec::new();
    };
    let mut problems = Vec::new();
    for (name, purpose) in &doc.purposes {
        let parsed = purpose.parse::<SheetPurpose>();
        match (wb.sheet_mut(name), parsed) {
            (Some(sheet), Ok(p)) => sheet.declared_purpose = p,
            (None, _) => problems.push(format!("purpose declared for unknown sheet {name:?}")),
            (Some(_), Err(_)) => {
                problems.push(format!("unrecognised purpose {purpose:?} for sheet {name:?}"))
            }
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::{Cell, Sheet};

    fn doc_wb(rows: &[(&str, &str)]) -> Workbook {
        let mut doc = Sheet::new(DEFAULT_DOC_SHEET);
        for (i, (a, b)) in rows.iter().enumerate() {
            let row = i as u32 + 1;
            doc.set(CellAddr { col: 1, row }, Cell::text(*a));
            if !b.is_empty() {
                doc.set(CellAddr { col: 2, row }, Cell::text(*b));
            }
        }
        let mut wb = Workbook::new("w");
        wb.sheets.push(doc);
        wb.sheets.push(Sheet::new("Inputs"));
        wb.sheets.push(Sheet::new("My Calc"));
        wb
    }

    #[test]
    fn labels_and_structure() {
        let wb = doc_wb(&[
            ("Purpose:", "Pricing"),
            ("Owner", "Treasury"),
            ("Sheet: Inputs", "input"),
            ("Sheet: 'My Calc'", "Calculations"),
            ("Hidden: My Calc!3:4", "scratch rows"),
            ("Hidden: Inputs!C", "lookup"),
            ("Hidden: Inputs", "legacy"),
        ]);
        let doc = read_doc_template(&wb, "documentation").unwrap();
        assert_eq!(doc.value("purpose"), Some("Pricing"));
        assert_eq!(doc.value("OWNER"), Some("Treasury"));
        assert_eq!(doc.purposes.len(), 2);
        assert!(doc.documents_row("my calc", 4));
        assert!(!doc.documents_row("My Calc", 5));
        assert!(doc.documents_col("Inputs", 3));
        assert!(doc.documents_sheet("Inputs"));
        assert!(!doc.documents_sheet("My Calc"));
    }

    #[test]
    fn purposes_applied() {
        let mut wb = doc_wb(&[
            ("Sheet: Inputs", "Inputs"),
            ("Sheet: My Calc", "calculation"),
            ("Sheet: Nowhere", "output"),
            ("Sheet: Documentation", "whatever"),
        ]);
        let problems = apply_declared_purposes(&mut wb, DEFAULT_DOC_SHEET);
        assert_eq!(wb.sheets[1].declared_purpose, SheetPurpose::Input);
        assert_eq!(wb.sheets[2].declared_purpose, SheetPurpose::Calculation);
        assert_eq!(problems.len(), 2);
    }

    #[test]
    fn hidden_item_forms() {
        assert_eq!(
            HiddenItem::parse("S!$C:$E"),
            Some(HiddenItem::Cols { sheet: "S".into(), first: 3, last: 5 })
        );
        assert_eq!(
            HiddenItem::parse("'O''Brien'!7"),
            Some(HiddenItem::Rows { sheet: "O'Brien".into(), first: 7, last: 7 })
        );
        assert_eq!(HiddenItem::parse("S!5:2"), None);
        assert_eq!(HiddenItem::parse(""), None);
    }

    #[test]
    fn missing_sheet() {
        assert!(read_doc_template(&Workbook::new("w"), DEFAULT_DOC_SHEET).is_none());
    }
}
