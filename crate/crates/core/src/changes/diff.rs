//! Address-aligned workbook diff and its replay.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workbook::{Cell, CellAddr, RangeRef, SecurityInfo, Sheet, SheetPurpose, Workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    ValueChanged,
    FormulaChanged,
    CellAdded,
    CellRemoved,
    LockChanged,
    /// Note edits and whitespace-only formula edits.
    MetadataChanged,
}

impl ChangeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChangeKind::ValueChanged => "value_changed",
            ChangeKind::FormulaChanged => "formula_changed",
            ChangeKind::CellAdded => "cell_added",
            ChangeKind::CellRemoved => "cell_removed",
            ChangeKind::LockChanged => "lock_changed",
            ChangeKind::MetadataChanged => "metadata_changed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellChange {
    pub sheet: String,
    pub addr: CellAddr,
    pub kind: ChangeKind,
    pub before: Option<Cell>,
    pub after: Option<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetAttributes {
    pub protection_enabled: bool,
    pub hidden: bool,
    pub declared_purpose: SheetPurpose,
    pub hidden_rows: Vec<u32>,
    pub hidden_cols: Vec<u32>,
}

impl SheetAttributes {
    pub fn of(sheet: &Sheet) -> Self {
        SheetAttributes {
            protection_enabled: sheet.protection_enabled,
            hidden: sheet.hidden,
            declared_purpose: sheet.declared_purpose,
            hidden_rows: sheet.hidden_rows.clone(),
            hidden_cols: sheet.hidden_cols.clone(),
        }
    }

    fn apply(&self, sheet: &mut Sheet) {
        sheet.protection_enabled = self.protection_enabled;
        sheet.hidden = self.hidden;
        sheet.declared_purpose = self.declared_purpose;
        sheet.hidden_rows = self.hidden_rows.clone();
        sheet.hidden_cols = self.hidden_cols.clone();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SheetChangeKind {
    SheetAdded,
    SheetRemoved,
    AttributesChanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetChange {
    pub sheet: String,
    pub kind: SheetChangeKind,
    pub before: Option<SheetAttributes>,
    pub after: Option<SheetAttributes>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedRangeChange {
    pub name: String,
    pub before: Option<RangeRef>,
    pub after: Option<RangeRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityChange {
    pub before: SecurityInfo,
    pub after: SecurityInfo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkbookDiff {
    pub changes: Vec<CellChange>,
    pub structural: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sheet_changes: Vec<SheetChange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub named_range_changes: Vec<NamedRangeChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub security_change: Option<SecurityChange>,
    /// Final sheet order, present only when replay would not produce it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheet_order: Option<Vec<String>>,
}

impl WorkbookDiff {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
            && !self.structural
            && self.sheet_changes.is_empty()
            && self.named_range_changes.is_empty()
            && self.security_change.is_none()
            && self.sheet_order.is_none()
    }

    /// Sheets touched by any cell or sheet-level change.
    pub fn touched_sheets(&self) -> BTreeSet<&str> {
        self.changes
            .iter()
            .map(|c| c.sheet.as_str())
            .chain(self.sheet_changes.iter().map(|c| c.sheet.as_str()))
            .collect()
    }
}

/// Formula text with whitespace outside quoted literals removed.
pub fn normalize_formula_ws(formula: &str) -> String {
    let mut out = String::with_capacity(formula.len());
    let mut quote: Option<char> = None;
    for ch in formula.chars() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None if ch == '"' || ch == '\'' => quote = Some(ch),
            None if ch.is_whitespace() => continue,
            None => {}
        }
        out.push(ch);
    }
    out
}

fn classify(before: &Cell, after: &Cell) -> Option<ChangeKind> {
    let norm = |c: &Cell| c.formula.as_deref().map(normalize_formula_ws);
    if norm(before) != norm(after) {
        Some(ChangeKind::FormulaChanged)
    } else if before.value != after.value {
        Some(ChangeKind::ValueChanged)
    } else if before.locked != after.locked {
        Some(ChangeKind::LockChanged)
    } else if before != after {
        Some(ChangeKind::MetadataChanged)
    } else {
        None
    }
}

fn whole_sheet(sheet: &Sheet, kind: ChangeKind, out: &mut Vec<CellChange>) {
    for (addr, cell) in &sheet.cells {
        let (before, after) = match kind {
            ChangeKind::CellAdded => (None, Some(cell.clone())),
            _ => (Some(cell.clone()), None),
        };
        out.push(CellChange {
            sheet: sheet.name.clone(),
            addr: *addr,
            kind,
            before,
            after,
        });
    }
}

fn by_name(wb: &Workbook) -> BTreeMap<&str, &Sheet> {
    wb.sheets.iter().map(|s| (s.name.as_str(), s)).collect()
}

/// Compares `old` and `new` cell by cell at equal addresses; sheets pair up
/// by exact name. Nothing is aligned across moved rows or renamed sheets.
pub fn diff(old: &Workbook, new: &Workbook) -> WorkbookDiff {
    let old_sheets = by_name(old);
    let new_sheets = by_name(new);
    let mut out = WorkbookDiff::default();

    for sheet in &old.sheets {
        let Some(after) = new_sheets.get(sheet.name.as_str()) else {
            whole_sheet(sheet, ChangeKind::CellRemoved, &mut out.changes);
            out.structural = true;
            out.sheet_changes.push(SheetChange {
                sheet: sheet.name.clone(),
                kind: SheetChangeKind::SheetRemoved,
                before: Some(SheetAttributes::of(sheet)),
                after: None,
            });
            continue;
        };
        let addrs: BTreeSet<CellAddr> = sheet.cells.keys().chain(after.cells.keys()).copied().collect();
        for addr in addrs {
            let (b, a) = (sheet.get(addr), after.get(addr));
            let kind = match (b, a) {
                (Some(b), Some(a)) => classify(b, a),
                (None, Some(_)) => Some(ChangeKind::CellAdded),
                (Some(_), None) => Some(ChangeKind::CellRemoved),
                (None, None) => None,
            };
            if let Some(kind) = kind {
                out.changes.push(CellChange {
                    sheet: sheet.name.clone(),
                    addr,
                    kind,
                    before: b.cloned(),
                    after: a.cloned(),
                });
            }
        }
        if sheet.bounding_box() != after.bounding_box() {
            out.structural = true;
        }
        let (before_attrs, after_attrs) = (SheetAttributes::of(sheet), SheetAttributes::of(after));
        if before_attrs != after_attrs {
            out.sheet_changes.push(SheetChange {
                sheet: sheet.name.clone(),
                kind: SheetChangeKind::AttributesChanged,
                before: Some(before_attrs),
                after: Some(after_attrs),
            });
        }
    }
    for sheet in new.sheets.iter().filter(|s| !old_sheets.contains_key(s.name.as_str())) {
        whole_sheet(sheet, ChangeKind::CellAdded, &mut out.changes);
        out.structural = true;
        out.sheet_changes.push(SheetChange {
            sheet: sheet.name.clone(),
            kind: SheetChangeKind::SheetAdded,
            before: None,
            after: Some(SheetAttributes::of(sheet)),
        });
    }

    let names: BTreeSet<&String> = old.named_ranges.keys().chain(new.named_ranges.keys()).collect();
    for name in names {
        let (b, a) = (old.named_ranges.get(name), new.named_ranges.get(name));
        if b != a {
            out.named_range_changes.push(NamedRangeChange {
                name: name.clone(),
                before: b.cloned(),
                after: a.cloned(),
            });
        }
    }
    if old.security != new.security {
        out.security_change = Some(SecurityChange {
            before: old.security,
            after: new.security,
        });
    }

    let replayed: Vec<&str> = old
        .sheets
        .iter()
        .map(|s| s.name.as_str())
        .filter(|n| new_sheets.contains_key(n))
        .chain(
            new.sheets
                .iter()
                .map(|s| s.name.as_str())
                .filter(|n| !old_sheets.contains_key(n)),
        )
        .collect();
    let wanted: Vec<&str> = new.sheets.iter().map(|s| s.name.as_str()).collect();
    if replayed != wanted {
        out.sheet_order = Some(wanted.into_iter().map(str::to_string).collect());
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatchError {
    #[error("sheet {0:?} not found")]
    MissingSheet(String),
    #[error("sheet {0:?} already exists")]
    SheetExists(String),
    #[error("cell {sheet}!{addr} does not hold the expected prior content")]
    Conflict { sheet: String, addr: CellAddr },
    #[error("sheet order does not name the patched sheets")]
    BadOrder,
}

fn sheet_mut<'a>(wb: &'a mut Workbook, name: &str) -> Result<&'a mut Sheet, PatchError> {
    wb.sheets
        .iter_mut()
        .find(|s| s.name == name)
        .ok_or_else(|| PatchError::MissingSheet(name.to_string()))
}

/// Replays `d` on `old`, checking every `before` against current content.
pub fn apply_diff(old: &Workbook, d: &WorkbookDiff) -> Result<Workbook, PatchError> {
    let mut wb = old.clone();
    for change in &d.sheet_changes {
        match change.kind {
            SheetChangeKind::SheetRemoved => {
                sheet_mut(&mut wb, &change.sheet)?;
                wb.sheets.retain(|s| s.name != change.sheet);
            }
            SheetChangeKind::SheetAdded => {
                if wb.sheets.iter().any(|s| s.name == change.sheet) {
                    return Err(PatchError::SheetExists(change.sheet.clone()));
                }
                let mut sheet = Sheet::new(change.sheet.clone());
                if let Some(attrs) = &change.after {
                    attrs.apply(&mut sheet);
                }
                wb.sheets.push(sheet);
            }
            SheetChangeKind::AttributesChanged => {
                let sheet = sheet_mut(&mut wb, &change.sheet)?;
                if let Some(attrs) = &change.after {
                    attrs.apply(sheet);
                }
            }
        }
    }
    let removed: BTreeSet<&str> = d
        .sheet_changes
        .iter()
        .filter(|c| c.kind == SheetChangeKind::SheetRemoved)
        .map(|c| c.sheet.as_str())
        .collect();
    for change in d.changes.iter().filter(|c| !removed.contains(c.sheet.as_str())) {
        let sheet = sheet_mut(&mut wb, &change.sheet)?;
        if sheet.get(change.addr) != change.before.as_ref() {
            return Err(PatchError::Conflict {
                sheet: change.sheet.clone(),
                addr: change.addr,
            });
        }
        match &change.after {
            Some(cell) => {
                sheet.cells.insert(change.addr, cell.clone());
            }
            None => {
                sheet.cells.remove(&change.addr);
            }
        }
    }
    if let Some(order) = &d.sheet_order {
        let mut sheets: BTreeMap<String, Sheet> = wb.sheets.drain(..).map(|s| (s.name.clone(), s)).collect();
        for name in order {
            wb.sheets.push(sheets.remove(name).ok_or(PatchError::BadOrder)?);
        }
        if !sheets.is_empty() {
            return Err(PatchError::BadOrder);
        }
    }
    for change in &d.named_range_changes {
        match &change.after {
            Some(range) => wb.named_ranges.insert(change.name.clone(), range.clone()),
            None => wb.named_ranges.remove(&change.name),
        };
    }
    if let Some(sec) = d.security_change {
        wb.security = sec.after;
    }
    Ok(wb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::{a1_to_addr, CellValue};

    fn book(cells: &[(&str, Cell)]) -> Workbook {
        let mut s = Sheet::new("S");
        for (a, c) in cells {
            s.set(a1_to_addr(a).unwrap(), c.clone());
        }
        let mut wb = Workbook::new("w");
        wb.sheets.push(s);
        wb
    }

    #[test]
    fn value_edit() {
        let a = book(&[("A1", Cell::number(5.0))]);
        let b = book(&[("A1", Cell::number(6.0))]);
        let d = diff(&a, &b);
        assert_eq!(d.changes.len(), 1);
        assert_eq!(d.changes[0].kind, ChangeKind::ValueChanged);
        assert!(!d.structural);
    }

    #[test]
    fn formula_edit_with_equal_value() {
        let a = book(&[("A1", Cell::number(5.0)), ("B1", Cell::formula("A1*2", CellValue::Number(10.0)))]);
        let b = book(&[("A1", Cell::number(5.0)), ("B1", Cell::formula("A1*3", CellValue::Number(10.0)))]);
        let d = diff(&a, &b);
        assert_eq!(d.changes.len(), 1);
        assert_eq!(d.changes[0].kind, ChangeKind::FormulaChanged);
        assert_eq!(d.changes[0].addr, a1_to_addr("B1").unwrap());
    }

    #[test]
    fn whitespace_only_formula_edit_is_metadata() {
        let a = book(&[("B1", Cell::formula("A1*2", CellValue::Number(10.0)))]);
        let b = book(&[("B1", Cell::formula(" A1 * 2", CellValue::Number(10.0)))]);
        let d = diff(&a, &b);
        assert_eq!(d.changes[0].kind, ChangeKind::MetadataChanged);
        assert_eq!(apply_diff(&a, &d).unwrap(), b);

        let c = book(&[("B1", Cell::formula("\"a b\"&A1", CellValue::Number(10.0)))]);
        let e = book(&[("B1", Cell::formula("\"ab\"&A1", CellValue::Number(10.0)))]);
        assert_eq!(diff(&c, &e).changes[0].kind, ChangeKind::FormulaChanged);
    }

    #[test]
    fn normalization_keeps_quoted_text() {
        assert_eq!(normalize_formula_ws(" SUM( A1 , 'My Sheet'!B2 ) "), "SUM(A1,'My Sheet'!B2)");
        assert_eq!(normalize_formula_ws("\"x \"\" y\" & A1"), "\"x \"\" y\"&A1");
    }

    #[test]
    fn growth_is_structural() {
        let a = book(&[("A1", Cell::number(1.0))]);
        let b = book(&[("A1", Cell::number(1.0)), ("C3", Cell::number(2.0))]);
        let d = diff(&a, &b);
        assert!(d.structural);
        assert_eq!(d.changes[0].kind, ChangeKind::CellAdded);
        // an edit inside the box is not
        let c = book(&[("A1", Cell::number(1.0)), ("C3", Cell::number(9.0))]);
        assert!(!diff(&b, &c).structural);
    }

    #[test]
    fn patch_detects_conflicts() {
        let a = book(&[("A1", Cell::number(5.0))]);
        let b = book(&[("A1", Cell::number(6.0))]);
        let d = diff(&a, &b);
        assert!(matches!(apply_diff(&b, &d), Err(PatchError::Conflict { .. })));
    }
}
