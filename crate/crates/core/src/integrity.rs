//! Design-integrity checks over a workbook: inconsistent formulas in dragged
//! regions, error values, embedded constants, circular references and
//! references to blank cells.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::formula::{
    expand_precedents, normalize_r1c1, parse_all, precedents, single_cell_refs, Expr,
    ParsedFormulas, UnaryOp, DEFAULT_EXPANSION_CAP,
};
use crate::workbook::{CellAddr, CellKey, CellValue, Workbook};

pub const INT_INCONSISTENT_FORMULA: &str = "INT-01";
pub const INT_ERROR_VALUE: &str = "INT-02";
pub const INT_HARDCODED_CONSTANT: &str = "INT-03";
pub const INT_CIRCULAR_REFERENCE: &str = "INT-04";
pub const INT_REF_TO_BLANK: &str = "INT-05";

pub const INTEGRITY_RULES: [&str; 5] = [
    INT_INCONSISTENT_FORMULA,
    INT_ERROR_VALUE,
    INT_HARDCODED_CONSTANT,
    INT_CIRCULAR_REFERENCE,
    INT_REF_TO_BLANK,
];

/// Minimum run length for a formula region.
pub const MIN_REGION_LEN: usize = 3;

pub const DEFAULT_EXEMPT_CONSTANTS: [f64; 4] = [0.0, 1.0, -1.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    High,
    Medium,
    Low,
    Info,
}

impl Severity {
    fn rank(&self) -> u8 {
        match self {
            Severity::Info => 0,
            Severity::Low => 1,
            Severity::Medium => 2,
            Severity::High => 3,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::High => "high",
            Severity::Medium => "medium",
            Severity::Low => "low",
            Severity::Info => "info",
        }
    }
}

impl PartialOrd for Severity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ordered by seriousness: `High > Medium > Low > Info`.
impl Ord for Severity {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "high" => Ok(Severity::High),
            "medium" => Ok(Severity::Medium),
            "low" => Ok(Severity::Low),
            "info" => Ok(Severity::Info),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

/// A rule violation. `sheet` is empty and `addr` absent for workbook-level
/// findings; `addr` alone is absent for sheet-level ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: String,
    pub severity: Severity,
    pub sheet: String,
    pub addr: Option<CellAddr>,
    pub message: String,
    pub evidence: String,
}

impl Finding {
    pub fn new(
        rule_id: &str,
        severity: Severity,
        sheet: impl Into<String>,
        addr: Option<CellAddr>,
        message: impl Into<String>,
    ) -> Self {
        Finding {
            rule_id: rule_id.to_string(),
            severity,
            sheet: sheet.into(),
            addr,
            message: message.into(),
            evidence: String::new(),
        }
    }

    pub fn with_evidence(mut self, evidence: impl Into<String>) -> Self {
        self.evidence = evidence.into();
        self
    }

    pub fn location(&self) -> String {
        match (&self.addr, self.sheet.is_empty()) {
            (Some(addr), _) => CellKey::new(self.sheet.clone(), *addr).to_string(),
            (None, false) => self.sheet.clone(),
            (None, true) => "(workbook)".to_string(),
        }
    }

    /// Identity used to decide whether a later audit reproduces this finding.
    pub fn same_issue(&self, other: &Finding) -> bool {
        self.rule_id == other.rule_id && self.sheet == other.sheet && self.addr == other.addr
    }

    fn sort_key(&self) -> (&str, Option<(u32, u32)>, &str, &str, &str) {
        (
            &self.sheet,
            self.addr.map(|a| (a.row, a.col)),
            &self.rule_id,
            &self.message,
            &self.evidence,
        )
    }
}

impl PartialOrd for Finding {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sorted by (sheet, row, col, rule_id); message and evidence break ties.
impl Ord for Finding {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key()
            .cmp(&other.sort_key())
            .then_with(|| other.severity.cmp(&self.severity))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Row,
    Column,
}

impl Orientation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Orientation::Row => "row",
            Orientation::Column => "column",
        }
    }
}

/// Maximal run of contiguous parsable formula cells along one axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FormulaRegion {
    pub sheet: String,
    pub cells: Vec<CellAddr>,
    pub orientation: Orientation,
}

impl FormulaRegion {
    pub fn span(&self) -> String {
        format!("{}:{}", self.cells[0], self.cells[self.cells.len() - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrityConfig {
    /// Numeric literals never reported as embedded constants.
    pub exempt_constants: Vec<f64>,
    /// Precedent cells expanded per formula when building the dependency graph.
    pub expansion_cap: usize,
}

impl Default for IntegrityConfig {
    fn default() -> Self {
        IntegrityConfig {
            exempt_constants: DEFAULT_EXEMPT_CONSTANTS.to_vec(),
            expansion_cap: DEFAULT_EXPANSION_CAP,
        }
    }
}

/// Parsed formulas shared by every check in one pass.
pub struct Analysis<'a> {
    pub workbook: &'a Workbook,
    pub formulas: ParsedFormulas,
}

impl<'a> Analysis<'a> {
    pub fn new(workbook: &'a Workbook) -> Self {
        Analysis {
            workbook,
            formulas: parse_all(workbook),
        }
    }
}

pub fn detect_regions(wb: &Workbook) -> Vec<FormulaRegion> {
    regions_in(&Analysis::new(wb))
}

/// Per sheet: row runs top to bottom, then column runs left to right.
pub fn regions_in(analysis: &Analysis<'_>) -> Vec<FormulaRegion> {
    let mut out = Vec::new();
    for sheet in &analysis.workbook.sheets {
        let cells: Vec<CellAddr> = analysis
            .formulas
            .parsed
            .range(CellKey::new(sheet.name.clone(), CellAddr { col: 0, row: 0 })..)
            .take_while(|(k, _)| k.sheet == sheet.name)
            .map(|(k, _)| k.addr)
            .collect();
        let mut by_row = cells.clone();
        by_row.sort_by_key(|a| (a.row, a.col));
        push_runs(&mut out, &sheet.name, &by_row, Orientation::Row);
        let mut by_col = cells;
        by_col.sort_by_key(|a| (a.col, a.row));
        push_runs(&mut out, &sheet.name, &by_col, Orientation::Column);
    }
    out
}

fn push_runs(out: &mut Vec<FormulaRegion>, sheet: &str, sorted: &[CellAddr], orientation: Orientation) {
    let adjacent = |a: &CellAddr, b: &CellAddr| match orientation {
        Orientation::Row => a.row == b.row && a.col + 1 == b.col,
        Orientation::Column => a.col == b.col && a.row + 1 == b.row,
    };
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || !adjacent(&sorted[i - 1], &sorted[i]) {
            if i - start >= MIN_REGION_LEN {
                out.push(FormulaRegion {
                    sheet: sheet.to_string(),
                    cells: sorted[start..i].to_vec(),
                    orientation,
                });
            }
            start = i;
        }
    }
}

pub fn check_inconsistent_formulas(wb: &Workbook) -> Vec<Finding> {
    sorted(inconsistent_formulas(&Analysis::new(wb)))
}

fn inconsistent_formulas(analysis: &Analysis<'_>) -> Vec<Finding> {
    let mut per_cell: BTreeMap<CellKey, Finding> = BTreeMap::new();
    let mut out = Vec::new();
    for region in regions_in(analysis) {
        let texts: Vec<String> = region
            .cells
            .iter()
            .map(|addr| {
                let ast = &analysis.formulas.parsed[&CellKey::new(region.sheet.clone(), *addr)];
                normalize_r1c1(ast, *addr).canonical_text
            })
            .collect();
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in &texts {
            *counts.entry(t.as_str()).or_default() += 1;
        }
        let n = texts.len();
        let majority = counts.iter().find(|(_, &c)| c * 2 > n).map(|(t, c)| (*t, *c));
        match majority {
            Some((major, count)) => {
                for (addr, text) in region.cells.iter().zip(&texts) {
                    if text == major {
                        continue;
                    }
                    let evidence = format!(
                        "{} region {}: {text} vs majority {major} ({count}/{n})",
                        region.orientation.as_str(),
                        region.span()
                    );
                    per_cell
                        .entry(CellKey::new(region.sheet.clone(), *addr))
                        .and_modify(|f| {
                            f.evidence.push_str("; ");
                            f.evidence.push_str(&evidence);
                        })
                        .or_insert_with(|| {
                            Finding::new(
                                INT_INCONSISTENT_FORMULA,
                                Severity::High,
                                region.sheet.clone(),
                                Some(*addr),
                                format!(
                                    "formula differs from the majority of its {} region {}",
                                    region.orientation.as_str(),
                                    region.span()
                                ),
                            )
                            .with_evidence(evidence.clone())
                        });
                }
            }
            None => {
                let mut variants: Vec<(&str, usize)> = counts.into_iter().collect();
                variants.sort();
                let evidence = variants
                    .iter()
                    .map(|(t, c)| format!("{t} x{c}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                out.push(
                    Finding::new(
                        INT_INCONSISTENT_FORMULA,
                        Severity::Info,
                        region.sheet.clone(),
                        Some(region.cells[0]),
                        heterogeneous_message(region.orientation, &region),
                    )
                    .with_evidence(evidence),
                );
            }
        }
    }
    out.extend(per_cell.into_values());
    out
}

/// Message for a region without a strict-majority formula.
pub fn heterogeneous_message(orientation: Orientation, region: &FormulaRegion) -> String {
    format!(
        "heterogeneous {} region {} ({} cells, no majority formula)",
        orientation.as_str(),
        region.span(),
        region.cells.len()
    )
}

pub fn check_error_values(wb: &Workbook) -> Vec<Finding> {
    let mut out: Vec<Finding> = wb
        .cells()
        .filter_map(|(sheet, addr, cell)| match &cell.value {
            CellValue::Error(code) => Some(
                Finding::new(
                    INT_ERROR_VALUE,
                    Severity::High,
                    sheet.name.clone(),
                    Some(addr),
                    format!("cell holds error value {code}"),
                )
                .with_evidence(cell.formula.clone().unwrap_or_default()),
            ),
            _ => None,
        })
        .collect();
    out.sort();
    out
}

pub fn check_hardcoded_constants(wb: &Workbook) -> Vec<Finding> {
    sorted(hardcoded_constants(
        &Analysis::new(wb),
        &DEFAULT_EXEMPT_CONSTANTS,
    ))
}

fn hardcoded_constants(analysis: &Analysis<'_>, exempt: &[f64]) -> Vec<Finding> {
    let mut out = Vec::new();
    for (key, ast) in &analysis.formulas.parsed {
        let mut literals = Vec::new();
        collect_arithmetic_literals(ast, false, &mut literals);
        literals.retain(|v| !exempt.iter().any(|e| (e - v).abs() <= 1e-12));
        if literals.is_empty() {
            continue;
        }
        let listed = literals
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(", ");
        let formula = analysis
            .workbook
            .sheet(&key.sheet)
            .and_then(|s| s.get(key.addr))
            .and_then(|c| c.formula.clone())
            .unwrap_or_default();
        out.push(
            Finding::new(
                INT_HARDCODED_CONSTANT,
                Severity::Medium,
                key.sheet.clone(),
                Some(key.addr),
                format!("formula embeds hard-coded constant(s) {listed}"),
            )
            .with_evidence(formula),
        );
    }
    out
}

/// Numeric literal value of `e` folding unary operators, if it is one.
fn literal_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Number(n) => Some(*n),
        Expr::Group(inner) => literal_value(inner),
        Expr::Unary { op, operand } => {
            let v = literal_value(operand)?;
            Some(match op {
                UnaryOp::Neg => -v,
                UnaryOp::Plus => v,
                UnaryOp::Percent => v / 100.0,
            })
        }
        _ => None,
    }
}

fn collect_arithmetic_literals(e: &Expr, arithmetic: bool, out: &mut Vec<f64>) {
    if let Some(v) = literal_value(e) {
        if arithmetic {
            out.push(v);
        }
        return;
    }
    match e {
        Expr::Binary { op, lhs, rhs } => {
            let arith = op.is_arithmetic();
            collect_arithmetic_literals(lhs, arith, out);
            collect_arithmetic_literals(rhs, arith, out);
        }
        Expr::Group(inner) => collect_arithmetic_literals(inner, arithmetic, out),
        Expr::Unary { operand, .. } => collect_arithmetic_literals(operand, true, out),
        Expr::Call { args, .. } => {
            for arg in args {
                collect_arithmetic_literals(arg, false, out);
            }
        }
        _ => {}
    }
}

pub fn check_circular_references(wb: &Workbook) -> Vec<Finding> {
    sorted(circular_references(&Analysis::new(wb), DEFAULT_EXPANSION_CAP))
}

fn circular_references(analysis: &Analysis<'_>, cap: usize) -> Vec<Finding> {
    let wb = analysis.workbook;
    let mut graph: DiGraph<CellKey, ()> = DiGraph::new();
    let mut nodes: HashMap<CellKey, NodeIndex> = HashMap::new();
    let mut node = |graph: &mut DiGraph<CellKey, ()>, key: &CellKey| {
        *nodes
            .entry(key.clone())
            .or_insert_with(|| graph.add_node(key.clone()))
    };
    let mut out = Vec::new();
    for (key, ast) in &analysis.formulas.parsed {
        let from = node(&mut graph, key);
        let (cells, truncated) = expand_precedents(wb, &precedents(ast, &key.sheet), cap);
        if truncated {
            out.push(
                Finding::new(
                    INT_CIRCULAR_REFERENCE,
                    Severity::Info,
                    key.sheet.clone(),
                    Some(key.addr),
                    format!("precedent expansion truncated at {cap} cells; cycle check incomplete"),
                ),
            );
        }
        for cell in cells {
            // Only formula cells have outgoing edges, so only they can close a cycle.
            if analysis.formulas.parsed.contains_key(&cell) {
                let to = node(&mut graph, &cell);
                graph.update_edge(from, to, ());
            }
        }
    }
    for component in tarjan_scc(&graph) {
        let is_cycle = component.len() >= 2
            || component
                .first()
                .is_some_and(|&n| graph.contains_edge(n, n));
        if !is_cycle {
            continue;
        }
        let mut members: Vec<&CellKey> = component.iter().map(|&n| &graph[n]).collect();
        members.sort();
        let first = members[0];
        let listed = members
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let message = if members.len() == 1 {
            "formula refers to itself".to_string()
        } else {
            format!("circular reference among {} cells", members.len())
        };
        out.push(
            Finding::new(
                INT_CIRCULAR_REFERENCE,
                Severity::High,
                first.sheet.clone(),
                Some(first.addr),
                message,
            )
            .with_evidence(listed),
        );
    }
    out
}

pub fn check_refs_to_blank(wb: &Workbook) -> Vec<Finding> {
    sorted(refs_to_blank(&Analysis::new(wb)))
}

fn refs_to_blank(analysis: &Analysis<'_>) -> Vec<Finding> {
    let wb = analysis.workbook;
    let mut out = Vec::new();
    for (key, ast) in &analysis.formulas.parsed {
        let blanks: BTreeSet<CellKey> = single_cell_refs(ast, &key.sheet)
            .into_iter()
            .filter_map(|target| {
                let sheet = wb.sheet(&target.sheet)?;
                let blank = sheet
                    .get(target.addr)
                    .is_none_or(|c| c.value.is_blank() && c.formula.is_none());
                blank.then(|| CellKey::new(sheet.name.clone(), target.addr))
            })
            .collect();
        if blanks.is_empty() {
            continue;
        }
        let listed = blanks
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        out.push(
            Finding::new(
                INT_REF_TO_BLANK,
                Severity::Low,
                key.sheet.clone(),
                Some(key.addr),
                format!("formula references blank cell(s) {listed}"),
            )
            .with_evidence(listed),
        );
    }
    out
}

fn sorted(mut findings: Vec<Finding>) -> Vec<Finding> {
    findings.sort();
    findings
}

/// Runs the enabled integrity rules over one parse of the workbook.
pub fn run_checks(
    analysis: &Analysis<'_>,
    enabled: &BTreeSet<String>,
    cfg: &IntegrityConfig,
) -> Vec<Finding> {
    let on = |id: &str| enabled.contains(id);
    let mut out = Vec::new();
    if on(INT_INCONSISTENT_FORMULA) {
        out.extend(inconsistent_formulas(analysis));
    }
    if on(INT_ERROR_VALUE) {
        out.extend(check_error_values(analysis.workbook));
    }
    if on(INT_HARDCODED_CONSTANT) {
        out.extend(hardcoded_constants(analysis, &cfg.exempt_constants));
    }
    if on(INT_CIRCULAR_REFERENCE) {
        out.extend(circular_references(analysis, cfg.expansion_cap));
    }
    if on(INT_REF_TO_BLANK) {
        out.extend(refs_to_blank(analysis));
    }
    sorted(out)
}

/// All integrity rules with default configuration.
pub fn run_all(wb: &Workbook) -> Vec<Finding> {
    let enabled = INTEGRITY_RULES.iter().map(|s| s.to_string()).collect();
    run_checks(&Analysis::new(wb), &enabled, &IntegrityConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workbook::{a1_to_addr, Cell, ErrorCode, Sheet};

    fn a(s: &str) -> CellAddr {
        a1_to_addr(s).unwrap()
    }

    fn wb(cells: &[(&str, Cell)]) -> Workbook {
        let mut s = Sheet::new("S");
        for (addr, cell) in cells {
            s.set(a(addr), cell.clone());
        }
        let mut w = Workbook::new("w");
        w.sheets.push(s);
        w
    }

    fn f(text: &str) -> Cell {
        Cell::formula(text, CellValue::Number(1.0))
    }

    fn n(v: f64) -> Cell {
        Cell::number(v)
    }

    #[test]
    fn column_region_of_four() {
        let w = wb(&[
            ("B2", f("A2*2")),
            ("B3", f("A3*2")),
            ("B4", f("A4*2")),
            ("B5", f("A5*2")),
        ]);
        let regions = detect_regions(&w);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].orientation, Orientation::Column);
        assert_eq!(regions[0].cells.len(), 4);
    }

    #[test]
    fn isolated_formula_has_no_region() {
        assert!(detect_regions(&wb(&[("B2", f("A1"))])).is_empty());
        assert!(detect_regions(&wb(&[("B2", f("A1")), ("B3", f("A2"))])).is_empty());
    }

    #[test]
    fn three_by_three_block() {
        let mut cells = Vec::new();
        for col in ["B", "C", "D"] {
            for row in 2..=4 {
                cells.push((format!("{col}{row}"), f("A1")));
            }
        }
        let refs: Vec<(&str, Cell)> = cells.iter().map(|(k, c)| (k.as_str(), c.clone())).collect();
        let regions = detect_regions(&wb(&refs));
        let rows = regions.iter().filter(|r| r.orientation == Orientation::Row).count();
        let cols = regions.iter().filter(|r| r.orientation == Orientation::Column).count();
        assert_eq!((rows, cols), (3, 3));
    }

    #[test]
    fn unparsable_formula_breaks_a_run() {
        let w = wb(&[("B2", f("A2")), ("B3", f("SUM(")), ("B4", f("A4")), ("B5", f("A5"))]);
        assert!(detect_regions(&w).is_empty());
    }

    #[test]
    fn deviant_in_column_is_reported() {
        let w = wb(&[
            ("B2", f("A2*2")),
            ("B3", f("A3*2")),
            ("B4", f("A4+2")),
            ("B5", f("A5*2")),
        ]);
        let findings = check_inconsistent_formulas(&w);
        assert_eq!(findings.len(), 1);
        let finding = &findings[0];
        assert_eq!(finding.addr, Some(a("B4")));
        assert_eq!(finding.severity, Severity::High);
        assert!(finding.evidence.contains("RC[-1]+2 vs majority RC[-1]*2 (3/4)"), "{}", finding.evidence);
    }

    #[test]
    fn consistent_region_is_clean() {
        let w = wb(&[
            ("B2", f("A2*2")),
            ("B3", f("A3*2")),
            ("B4", f("A4*2")),
            ("B5", f("A5*2")),
        ]);
        assert!(check_inconsistent_formulas(&w).is_empty());
    }

    #[test]
    fn two_by_two_split_is_heterogeneous() {
        let w = wb(&[
            ("B2", f("A2*2")),
            ("B3", f("A3*2")),
            ("B4", f("A4+2")),
            ("B5", f("A5+2")),
        ]);
        let findings = check_inconsistent_formulas(&w);
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].severity, Severity::Info);
        assert_eq!(findings[0].addr, Some(a("B2")));
        assert_eq!(
            findings[0].message,
            "heterogeneous column region B2:B5 (4 cells, no majority formula)"
        );
    }

    #[test]
    fn error_values() {
        let w = wb(&[("A1", Cell::constant(CellValue::Error(ErrorCode::Ref)))]);
        assert_eq!(check_error_values(&w).len(), 1);
        assert!(check_error_values(&wb(&[("A1", n(1.0))])).is_empty());
        let three = wb(&[
            ("A1", Cell::constant(CellValue::Error(ErrorCode::Ref))),
            ("A2", Cell::formula("1/0", CellValue::Error(ErrorCode::Div0))),
            ("C9", Cell::constant(CellValue::Error(ErrorCode::NA))),
        ]);
        assert_eq!(check_error_values(&three).len(), 3);
    }

    #[test]
    fn hardcoded_constants() {
        let hits = |text: &str| check_hardcoded_constants(&wb(&[("C1", f(text))])).len();
        assert_eq!(hits("A1*1.05"), 1);
        assert_eq!(hits("A1*B1"), 0);
        assert_eq!(hits("ROUND(A1,2)"), 0);
        assert_eq!(hits("ROUND(A1*1.05,2)"), 1);
        assert_eq!(hits("A1*100+1-0"), 0);
        assert_eq!(hits("A1*-1"), 0);
        assert_eq!(hits("A1*5%"), 1);
        assert_eq!(hits("A1*(1+0.2)"), 1);
        assert_eq!(hits("IF(A1>5,A2,A3)"), 0);
        let finding = &check_hardcoded_constants(&wb(&[("C1", f("A1*1.05"))]))[0];
        assert!(finding.message.contains("1.05"));
    }

    #[test]
    fn circular_references() {
        let two = wb(&[("A1", f("B1")), ("B1", f("A1"))]);
        let found = check_circular_references(&two);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].addr, Some(a("A1")));
        assert_eq!(found[0].evidence, "S!A1, S!B1");
        assert_eq!(check_circular_references(&wb(&[("A1", f("A1+1"))])).len(), 1);
        let chain = wb(&[("A1", n(1.0)), ("B1", f("A1")), ("C1", f("B1"))]);
        assert!(check_circular_references(&chain).is_empty());
        let via_range = wb(&[("A1", f("SUM(A2:A3)")), ("A3", f("A1*2"))]);
        assert_eq!(check_circular_references(&via_range).len(), 1);
    }

    #[test]
    fn refs_to_blank() {
        assert_eq!(check_refs_to_blank(&wb(&[("B1", f("A1*2"))])).len(), 1);
        assert!(check_refs_to_blank(&wb(&[("B1", f("SUM(A1:A10)"))])).is_empty());
        assert!(check_refs_to_blank(&wb(&[("A1", n(3.0)), ("B1", f("A1*2"))])).is_empty());
        assert!(check_refs_to_blank(&wb(&[("B1", f("Missing!A1"))])).is_empty());
    }

    #[test]
    fn findings_sorted_and_repeatable() {
        let w = wb(&[
            ("C3", Cell::constant(CellValue::Error(ErrorCode::NA))),
            ("A1", f("A1")),
            ("B1", f("Z9*3.5")),
        ]);
        let first = run_all(&w);
        assert_eq!(first, run_all(&w));
        let keys: Vec<_> = first.iter().map(|f| (f.addr.unwrap(), f.rule_id.clone())).collect();
        let mut sorted_keys = keys.clone();
        sorted_keys.sort_by_key(|(a, r)| (a.row, a.col, r.clone()));
        assert_eq!(keys, sorted_keys);
    }
}
