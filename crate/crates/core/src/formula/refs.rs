use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::{CellRef, Expr};
use super::parser::{parse_formula, FormulaError};
use crate::workbook::{CellAddr, CellKey, RangeRef, Workbook};

/// Functions whose result can change without any precedent changing.
pub const DEFAULT_VOLATILE_FUNCTIONS: [&str; 6] =
    ["NOW", "TODAY", "RAND", "RANDBETWEEN", "OFFSET", "INDIRECT"];

/// Maximum precedent cells expanded per formula.
pub const DEFAULT_EXPANSION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Precedents {
    /// Ranges read by the formula; single cells are 1x1 ranges.
    pub ranges: BTreeSet<RangeRef>,
    /// Defined names read by the formula, uppercased.
    pub names: BTreeSet<String>,
    pub has_external_ref: bool,
    pub volatile: bool,
}

pub fn precedents(ast: &Expr, host_sheet: &str) -> Precedents {
    precedents_with(ast, host_sheet, &DEFAULT_VOLATILE_FUNCTIONS)
}

/// [`precedents`] with a caller-supplied volatile-function list.
pub fn precedents_with<S: AsRef<str>>(ast: &Expr, host_sheet: &str, volatile: &[S]) -> Precedents {
    let mut out = Precedents::default();
    let sheet_of = |r: &CellRef| r.sheet.clone().unwrap_or_else(|| host_sheet.to_string());
    ast.walk(&mut |e| match e {
        Expr::Ref(r) if r.book.is_some() => out.has_external_ref = true,
        Expr::Range { start, .. } if start.book.is_some() => out.has_external_ref = true,
        Expr::Ref(r) => {
            out.ranges.insert(RangeRef::cell(sheet_of(r), r.addr()));
        }
        Expr::Range { start, end } => {
            out.ranges
                .insert(RangeRef::spanning(sheet_of(start), start.addr(), end.addr()));
        }
        Expr::Name(name) => {
            out.names.insert(name.to_ascii_uppercase());
        }
        Expr::Call { name, .. } => {
            let bare = name.strip_prefix("_XLFN.").unwrap_or(name);
            if volatile.iter().any(|v| v.as_ref().eq_ignore_ascii_case(bare)) {
                out.volatile = true;
            }
        }
        _ => {}
    });
    out
}

/// Translates every relative reference component by the given offset.
/// Returns `None` if any reference would leave the grid.
pub fn shift_relative(ast: &Expr, d_row: i64, d_col: i64) -> Option<Expr> {
    ast.map_refs(&mut |r| {
        let row_shift = if r.row_absolute { 0 } else { d_row };
        let col_shift = if r.col_absolute { 0 } else { d_col };
        let moved = r.addr().offset(row_shift, col_shift)?;
        Some(CellRef {
            col: moved.col,
            row: moved.row,
            ..r.clone()
        })
    })
}

/// Single-cell references written in a formula (ranges excluded).
pub fn single_cell_refs(ast: &Expr, host_sheet: &str) -> Vec<CellKey> {
    let mut out = Vec::new();
    ast.walk(&mut |e| {
        if let Expr::Ref(r) = e {
            if r.book.is_none() {
                let sheet = r.sheet.clone().unwrap_or_else(|| host_sheet.to_string());
                out.push(CellKey::new(sheet, r.addr()));
            }
        }
    });
    out
}

/// Every formula in a workbook parsed once.
#[derive(Debug, Clone, Default)]
pub struct ParsedFormulas {
    pub parsed: BTreeMap<CellKey, Expr>,
    pub failed: BTreeMap<CellKey, FormulaError>,
}

impl ParsedFormulas {
    pub fn get(&self, key: &CellKey) -> Option<&Expr> {
        self.parsed.get(key)
    }
}

pub fn parse_all(wb: &Workbook) -> ParsedFormulas {
    let mut out = ParsedFormulas::default();
    for (sheet, addr, cell) in wb.cells() {
        if let Some(text) = &cell.formula {
            let key = CellKey::new(sheet.name.clone(), addr);
            match parse_formula(text) {
                Ok(ast) => {
                    out.parsed.insert(key, ast);
                }
                Err(err) => {
                    out.failed.insert(key, err);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnparsableFormula {
    pub cell: CellKey,
    pub formula: String,
    pub error: String,
}

/// Inverse dependency map: precedent cell → formula cells that read it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceIndex {
    pub referenced_by: BTreeMap<CellKey, BTreeSet<CellKey>>,
    pub unparsable: Vec<UnparsableFormula>,
    /// Formulas whose precedent expansion hit the cap.
    pub truncated: Vec<CellKey>,
    /// Formulas containing opaque tokens (array constants, table references).
    pub opaque: Vec<CellKey>,
}

impl ReferenceIndex {
    pub fn readers_of(&self, key: &CellKey) -> Option<&BTreeSet<CellKey>> {
        self.referenced_by.get(key)
    }

    pub fn is_referenced(&self, key: &CellKey) -> bool {
        self.referenced_by.get(key).is_some_and(|s| !s.is_empty())
    }
}

/// Resolves a formula's precedents to concrete cells.
///
/// Ranges small enough to fit the remaining budget are expanded over every
/// coordinate; larger ranges are expanded over populated cells only, which is
/// exact for every consumer of the index. Returns the cells and whether the
/// cap truncated the expansion.
pub fn expand_precedents(
    wb: &Workbook,
    prec: &Precedents,
    cap: usize,
) -> (BTreeSet<CellKey>, bool) {
    let mut out = BTreeSet::new();
    let mut truncated = false;
    let mut ranges: Vec<RangeRef> = prec.ranges.iter().cloned().collect();
    for name in &prec.names {
        if let Some(range) = wb.named_range(name) {
            ranges.push(range.clone());
        }
    }
    'ranges: for range in ranges {
        let sheet_name = wb
            .canonical_sheet_name(&range.sheet)
            .unwrap_or(&range.sheet)
            .to_string();
        let budget = cap.saturating_sub(out.len()) as u64;
        if range.cell_count() <= budget {
            for addr in range.cells() {
                out.insert(CellKey::new(sheet_name.clone(), addr));
            }
            continue;
        }
        let Some(sheet) = wb.sheet(&sheet_name) else {
            continue;
        };
        let lo = CellAddr {
            col: 1,
            row: range.top_left.row,
        };
        let hi = CellAddr {
            col: u32::MAX,
            row: range.bottom_right.row,
        };
        for addr in sheet.cells.range(lo..=hi).map(|(a, _)| *a) {
            if !range.contains(addr) {
                continue;
            }
            if out.len() >= cap {
                truncated = true;
                break 'ranges;
            }
            out.insert(CellKey::new(sheet_name.clone(), addr));
        }
    }
    (out, truncated)
}

pub fn referenced_by(wb: &Workbook) -> ReferenceIndex {
    referenced_by_parsed(wb, &parse_all(wb), DEFAULT_EXPANSION_CAP)
}

pub fn referenced_by_parsed(wb: &Workbook, formulas: &ParsedFormulas, cap: usize) -> ReferenceIndex {
    let mut index = ReferenceIndex::default();
    for (key, err) in &formulas.failed {
        let formula = wb
            .sheet(&key.sheet)
            .and_then(|s| s.get(key.addr))
            .and_then(|c| c.formula.clone())
            .unwrap_or_default();
        index.unparsable.push(UnparsableFormula {
            cell: key.clone(),
            formula,
            error: err.to_string(),
        });
    }
    for (key, ast) in &formulas.parsed {
        if !ast.opaque_tokens().is_empty() {
            index.opaque.push(key.clone());
        }
        let prec = precedents(ast, &key.sheet);
        let (cells, truncated) = expand_precedents(wb, &prec, cap);
        if truncated {
            index.truncated.push(key.clone());
        }
        for cell in cells {
            index
                .referenced_by
                .entry(cell)
                .or_default()
                .insert(key.clone());
        }
    }
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{normalize_r1c1, print_formula};
    use crate::workbook::{a1_to_addr, Cell, CellValue, Sheet};

    fn a(s: &str) -> CellAddr {
        a1_to_addr(s).unwrap()
    }

    fn prec(text: &str, sheet: &str) -> Precedents {
        precedents(&parse_formula(text).unwrap(), sheet)
    }

    #[test]
    fn dedupes_and_inherits_host_sheet() {
        let p = prec("A1+A1", "Calc");
        assert_eq!(p.ranges.len(), 1);
        assert_eq!(p.ranges.iter().next().unwrap().to_string(), "Calc!A1");
        assert!(!p.volatile && !p.has_external_ref);
    }

    #[test]
    fn volatile_and_external_flags() {
        let p = prec("NOW()", "S");
        assert!(p.ranges.is_empty());
        assert!(p.volatile);
        let p = prec("[FY22.xlsx]Data!A1", "S");
        assert!(p.has_external_ref);
        assert!(p.ranges.is_empty());
        assert!(prec("_xlfn.RANDBETWEEN(1,2)", "S").volatile);
        assert!(!precedents_with(&parse_formula("NOW()").unwrap(), "S", &["TODAY"]).volatile);
    }

    #[test]
    fn ranges_are_normalized_and_sheet_qualified() {
        let p = prec("SUM(B5:A1)+Other!C3", "S");
        let texts: Vec<String> = p.ranges.iter().map(|r| r.to_string()).collect();
        assert_eq!(texts, vec!["Other!C3", "S!A1:B5"]);
    }

    #[test]
    fn shift_moves_relative_components_only() {
        let ast = parse_formula("A1+$B$2+C$3+$D4").unwrap();
        let moved = shift_relative(&ast, 2, 1).unwrap();
        assert_eq!(print_formula(&moved), "B3+$B$2+D$3+$D6");
        assert!(shift_relative(&ast, -1, 0).is_none());
        let host = a("E5");
        assert_eq!(
            normalize_r1c1(&ast, host),
            normalize_r1c1(&moved, host.offset(2, 1).unwrap())
        );
    }

    fn workbook(cells: &[(&str, Cell)]) -> Workbook {
        let mut s = Sheet::new("S");
        for (addr, cell) in cells {
            s.set(a(addr), cell.clone());
        }
        let mut wb = Workbook::new("w");
        wb.sheets.push(s);
        wb
    }

    fn key(addr: &str) -> CellKey {
        CellKey::new("S", a(addr))
    }

    #[test]
    fn referenced_by_single_and_range() {
        let wb = workbook(&[
            ("A1", Cell::number(1.0)),
            ("A2", Cell::number(2.0)),
            ("A3", Cell::number(3.0)),
            ("B1", Cell::formula("A1*2", CellValue::Number(2.0))),
            ("C1", Cell::formula("SUM(A1:A3)", CellValue::Number(6.0))),
        ]);
        let idx = referenced_by(&wb);
        assert_eq!(
            idx.readers_of(&key("A1")).unwrap(),
            &BTreeSet::from([key("B1"), key("C1")])
        );
        for cell in ["A2", "A3"] {
            assert_eq!(idx.readers_of(&key(cell)).unwrap(), &BTreeSet::from([key("C1")]));
        }
        assert!(idx.unparsable.is_empty());
    }

    #[test]
    fn referenced_by_empty_and_unparsable() {
        assert_eq!(referenced_by(&Workbook::new("w")), ReferenceIndex::default());
        let wb = workbook(&[("A1", Cell::formula("SUM(", CellValue::Number(0.0)))]);
        let idx = referenced_by(&wb);
        assert!(idx.referenced_by.is_empty());
        assert_eq!(idx.unparsable.len(), 1);
        assert_eq!(idx.unparsable[0].cell, key("A1"));
    }

    #[test]
    fn named_ranges_resolve_and_sheet_case_folds() {
        let mut wb = workbook(&[
            ("A1", Cell::number(1.0)),
            ("B1", Cell::formula("Rate*s!A1", CellValue::Number(1.0))),
        ]);
        wb.named_ranges
            .insert("RATE".into(), RangeRef::cell("S", a("A1")));
        let idx = referenced_by(&wb);
        assert_eq!(idx.readers_of(&key("A1")).unwrap(), &BTreeSet::from([key("B1")]));
    }

    #[test]
    fn large_ranges_expand_over_populated_cells_with_cap() {
        let mut cells: Vec<(String, Cell)> = (1..=20)
            .map(|r| (format!("A{r}"), Cell::number(r as f64)))
            .collect();
        cells.push(("B1".into(), Cell::formula("SUM(A1:A1048576)", CellValue::Number(0.0))));
        let refs: Vec<(&str, Cell)> = cells.iter().map(|(k, c)| (k.as_str(), c.clone())).collect();
        let wb = workbook(&refs);
        let formulas = parse_all(&wb);
        let idx = referenced_by_parsed(&wb, &formulas, 10_000);
        assert_eq!(idx.referenced_by.len(), 20);
        assert!(idx.truncated.is_empty());
        let idx = referenced_by_parsed(&wb, &formulas, 5);
        assert_eq!(idx.referenced_by.len(), 5);
        assert_eq!(idx.truncated, vec![key("B1")]);
    }
}
