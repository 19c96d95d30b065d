//! Random formula grids with planted deviants, and a brute-force oracle for
//! inconsistent-formula detection.
//!
//! Each formula cell is an instance of a template with fixed relative offsets,
//! so its equivalence class is known by construction: the oracle votes on
//! template ids and never normalizes a formula.

use std::collections::{BTreeMap, BTreeSet};

use euc_core::workbook::{column_letters, Cell, CellAddr, CellValue, Sheet, Workbook};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID_SHEET: &str = "Grid";
const ORIGIN_ROW: u32 = 3;
const ORIGIN_COL: u32 = 3;

/// Templates as functions of the host; all offsets stay within two cells up
/// or left of the host, so every render is a valid reference.
const TEMPLATES: usize = 6;

fn render(template: usize, host: CellAddr) -> String {
    let cell = |dr: i64, dc: i64| {
        let row = i64::from(host.row) + dr;
        let col = i64::from(host.col) + dc;
        format!("{}{}", column_letters(col as u32), row)
    };
    match template {
        0 => format!("{}*2", cell(0, -1)),
        1 => format!("{}+2", cell(0, -1)),
        2 => format!("{}*2", cell(-1, 0)),
        3 => format!("SUM({}:{})", cell(-2, -1), cell(0, -1)),
        4 => format!("$A$1*{}", cell(0, -2)),
        _ => format!("{}*3", cell(0, -1)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunOrientation {
    Row,
    Column,
}

impl RunOrientation {
    pub fn label(&self) -> &'static str {
        match self {
            RunOrientation::Row => "row",
            RunOrientation::Column => "column",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedGrid {
    pub workbook: Workbook,
    /// Template id per formula cell.
    pub templates: BTreeMap<CellAddr, usize>,
    pub planted: Vec<CellAddr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleVerdict {
    /// Cells disagreeing with a strict-majority formula in some run.
    pub flagged: BTreeSet<CellAddr>,
    /// Runs with no strict majority: (orientation, first cell, last cell).
    pub heterogeneous: BTreeSet<(RunOrientation, CellAddr, CellAddr)>,
}

/// Builds a grid of up to 8x8 cells with one base template filling a random
/// share of cells and `deviants` (0-3) cells switched to another template.
pub fn planted_grid(seed: u64, deviants: usize) -> PlantedGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rng.gen_range(1..=8u32);
    let cols = rng.gen_range(1..=8u32);
    let base = rng.gen_range(0..TEMPLATES);
    let density: f64 = rng.gen_range(0.5..=1.0);
    let mut templates = BTreeMap::new();
    let mut sheet = Sheet::new(GRID_SHEET);
    let mut all_cells = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let addr = CellAddr {
                row: ORIGIN_ROW + r,
                col: ORIGIN_COL + c,
            };
            all_cells.push(addr);
            if rng.gen_bool(density) {
                templates.insert(addr, base);
            } else if rng.gen_bool(0.5) {
                sheet.set(addr, Cell::number(f64::from(rng.gen_range(1..100u32))));
            }
        }
    }
    let mut planted = Vec::new();
    for _ in 0..deviants.min(all_cells.len()) {
        let addr = all_cells[rng.gen_range(0..all_cells.len())];
        let mut other = rng.gen_range(0..TEMPLATES - 1);
        if other >= base {
            other += 1;
        }
        sheet.cells.remove(&addr);
        templates.insert(addr, other);
        planted.push(addr);
    }
    for (addr, template) in &templates {
        sheet.set(
            *addr,
            Cell::formula(render(*template, *addr), CellValue::Number(0.0)),
        );
    }
    let mut workbook = Workbook::new("grid");
    workbook.sheets.push(sheet);
    PlantedGrid {
        workbook,
        templates,
        planted,
    }
}

/// Enumerates maximal runs of length >= 3 by scanning every row and column,
/// then takes a strict-majority vote on template ids in each run.
pub fn inconsistency_oracle(grid: &PlantedGrid) -> OracleVerdict {
    let mut verdict = OracleVerdict::default();
    let ids = &grid.templates;
    let (max_row, max_col) = ids
        .keys()
        .fold((0, 0), |(r, c), a| (r.max(a.row), c.max(a.col)));
    let mut runs: Vec<(RunOrientation, Vec<CellAddr>)> = Vec::new();
    for row in 1..=max_row {
        let line: Vec<CellAddr> = (1..=max_col + 1).map(|col| CellAddr { col, row }).collect();
        collect_runs(&line, ids, RunOrientation::Row, &mut runs);
    }
    for col in 1..=max_col {
        let line: Vec<CellAddr> = (1..=max_row + 1).map(|row| CellAddr { col, row }).collect();
        collect_runs(&line, ids, RunOrientation::Column, &mut runs);
    }
    for (orientation, run) in runs {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for addr in &run {
            *counts.entry(ids[addr]).or_default() += 1;
        }
        let majority = counts
            .iter()
            .find(|(_, &n)| n * 2 > run.len())
            .map(|(&id, _)| id);
        match majority {
            Some(id) => verdict
                .flagged
                .extend(run.iter().filter(|a| ids[*a] != id).copied()),
            None => {
                verdict
                    .heterogeneous
                    .insert((orientation, run[0], *run.last().unwrap()));
            }
        }
    }
    verdict
}

fn collect_runs(
    line: &[CellAddr],
    ids: &BTreeMap<CellAddr, usize>,
    orientation: RunOrientation,
    runs: &mut Vec<(RunOrientation, Vec<CellAddr>)>,
) {
    let mut current = Vec::new();
    for addr in line {
        if ids.contains_key(addr) {
            current.push(*addr);
        } else {
            if current.len() >= 3 {
                runs.push((orientation, std::mem::take(&mut current)));
            }
            current.clear();
        }
    }
    if current.len() >= 3 {
        runs.push((orientation, current));
    }
}
