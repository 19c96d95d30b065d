use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::formula::{referenced_by, ReferenceIndex};
use crate::workbook::{CellKey, CellValue, Workbook};

use super::rules::check_cells;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Input,
    Calculation,
    Output,
    Label,
    Check,
}

/// Heuristic role of every stored cell. A formula read by no other formula
/// is both a calculation and an output; check-range membership overrides
/// everything else. Advisory: the audit judges declared purposes instead.
pub fn classify_cells(wb: &Workbook, check_prefix: &str) -> BTreeMap<CellKey, BTreeSet<CellClass>> {
    classify_with(wb, &check_cells(wb, check_prefix), &referenced_by(wb))
}

pub(crate) fn classify_with(
    wb: &Workbook,
    checks: &BTreeSet<CellKey>,
    refs: &ReferenceIndex,
) -> BTreeMap<CellKey, BTreeSet<CellClass>> {
    let mut out = BTreeMap::new();
    for (sheet, addr, cell) in wb.cells() {
        let key = CellKey::new(sheet.name.clone(), addr);
        let referenced = refs.is_referenced(&key);
        let classes: BTreeSet<CellClass> = if checks.contains(&key) {
            [CellClass::Check].into()
        } else if cell.has_formula() {
            if referenced {
                [CellClass::Calculation].into()
            } else {
                [CellClass::Calculation, CellClass::Output].into()
            }
        } else if referenced {
            [CellClass::Input].into()
        } else {
            match &cell.value {
                CellValue::Text(_) => [CellClass::Label].into(),
                // A note on an otherwise blank locked cell annotates the sheet.
                CellValue::Blank if cell.locked => [CellClass::Label].into(),
                // Unreferenced numbers, flags and unlocked blanks are data
                // waiting to be used.
                _ => [CellClass::Input].into(),
            }
        };
        out.insert(key, classes);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::{a1_to_addr, Cell, RangeRef, Sheet};

    fn key(a: &str) -> CellKey {
        CellKey::new("S", a1_to_addr(a).unwrap())
    }

    #[test]
    fn examples() {
        let mut s = Sheet::new("S");
        s.set(a1_to_addr("A1").unwrap(), Cell::number(5.0));
        s.set(a1_to_addr("B1").unwrap(), Cell::formula("A1*2", CellValue::Number(10.0)));
        s.set(a1_to_addr("C1").unwrap(), Cell::text("Revenue"));
        s.set(a1_to_addr("D1").unwrap(), Cell::formula("B1-10", CellValue::Number(0.0)));
        s.set(a1_to_addr("E1").unwrap(), Cell::number(7.0));
        let mut wb = Workbook::new("w");
        wb.sheets.push(s);
        wb.named_ranges
            .insert("CHK_TOTAL".into(), RangeRef::parse("S!D1:D1").unwrap());
        let classes = classify_cells(&wb, "CHK_");
        assert_eq!(classes[&key("A1")], [CellClass::Input].into());
        assert_eq!(classes[&key("B1")], [CellClass::Calculation].into());
        assert_eq!(classes[&key("C1")], [CellClass::Label].into());
        assert_eq!(classes[&key("D1")], [CellClass::Check].into());
        assert_eq!(classes[&key("E1")], [CellClass::Input].into());
        assert_eq!(classes.len(), 5);
    }

    #[test]
    fn unread_formula_is_also_output() {
        let mut s = Sheet::new("S");
        s.set(a1_to_addr("A1").unwrap(), Cell::number(5.0));
        s.set(a1_to_addr("B1").unwrap(), Cell::formula("A1*2", CellValue::Number(10.0)));
        let mut wb = Workbook::new("w");
        wb.sheets.push(s);
        let classes = classify_cells(&wb, "CHK_");
        assert_eq!(classes[&key("B1")], [CellClass::Calculation, CellClass::Output].into());
    }
}
