//! Random workbooks and edited copies for diff properties.

use euc_core::workbook::{Cell, CellAddr, CellValue, ErrorCode, Sheet, SheetPurpose, Workbook};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHEET_NAMES: [&str; 6] = ["Inputs", "Calc", "Output", "Documentation", "Change_Log", "Extra Sheet"];
const PURPOSES: [SheetPurpose; 6] = [
    SheetPurpose::Input,
    SheetPurpose::Calculation,
    SheetPurpose::Output,
    SheetPurpose::Documentation,
    SheetPurpose::Log,
    SheetPurpose::Undeclared,
];
const FORMULAS: [&str; 6] = ["A1*2", "SUM(A1:A3)", "B2 + 1", "IF(A1>0,1,-1)", "Inputs!A1*1.05", "NOW()"];

fn random_value(rng: &mut ChaCha8Rng) -> CellValue {
    match rng.gen_range(0..10) {
        0..=4 => CellValue::Number(f64::from(rng.gen_range(-500..500i32)) / 4.0),
        5 | 6 => CellValue::Text(["Revenue", "Units", "x", "Total"][rng.gen_range(0..4)].to_string()),
        7 => CellValue::Bool(rng.gen_bool(0.5)),
        8 => CellValue::Error(ErrorCode::ALL[rng.gen_range(0..ErrorCode::ALL.len())]),
        _ => CellValue::Blank,
    }
}

pub fn random_cell(rng: &mut ChaCha8Rng) -> Cell {
    let formula = rng
        .gen_bool(0.3)
        .then(|| FORMULAS[rng.gen_range(0..FORMULAS.len())].to_string());
    let mut value = random_value(rng);
    let note = rng.gen_bool(0.1).then(|| "reviewed".to_string());
    if value.is_blank() && formula.is_none() && note.is_none() {
        value = CellValue::Number(0.0);
    }
    Cell {
        value,
        formula,
        locked: rng.gen_bool(0.7),
        note,
    }
}

fn random_addr(rng: &mut ChaCha8Rng) -> CellAddr {
    CellAddr {
        col: rng.gen_range(1..=6),
        row: rng.gen_range(1..=8),
    }
}

fn random_sheet(rng: &mut ChaCha8Rng, name: &str) -> Sheet {
    let mut sheet = Sheet::new(name);
    for _ in 0..rng.gen_range(0..20) {
        let addr = random_addr(rng);
        sheet.set(addr, random_cell(rng));
    }
    randomize_attrs(rng, &mut sheet);
    sheet
}

fn randomize_attrs(rng: &mut ChaCha8Rng, sheet: &mut Sheet) {
    sheet.protection_enabled = rng.gen_bool(0.5);
    sheet.hidden = rng.gen_bool(0.15);
    sheet.declared_purpose = PURPOSES[rng.gen_range(0..PURPOSES.len())];
    sheet.hidden_rows = if rng.gen_bool(0.2) { vec![2, 5] } else { Vec::new() };
    sheet.hidden_cols = if rng.gen_bool(0.2) { vec![3] } else { Vec::new() };
}

pub fn random_workbook(seed: u64) -> Workbook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = SHEET_NAMES.to_vec();
    names.shuffle(&mut rng);
    let mut wb = Workbook::new(format!("wb{seed}"));
    for name in names.iter().take(rng.gen_range(1..=3)) {
        wb.sheets.push(random_sheet(&mut rng, name));
    }
    wb.security.sheet_protection_count =
        wb.sheets.iter().filter(|s| s.protection_enabled).count() as u32;
    wb
}

/// A random workbook and an edited copy: cell edits, additions, removals,
/// sheet attribute changes, sheet removals and insertions.
pub fn random_pair(seed: u64) -> (Workbook, Workbook) {
    let a = random_workbook(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut b = a.clone();
    b.sheets.retain(|_| !rng.gen_bool(0.15));
    for sheet in &mut b.sheets {
        let addrs: Vec<CellAddr> = sheet.cells.keys().copied().collect();
        for addr in addrs {
            if !rng.gen_bool(0.3) {
                continue;
            }
            let cell = sheet.cells.get_mut(&addr).unwrap();
            match rng.gen_range(0..5) {
                0 => cell.value = random_value(&mut rng),
                1 => cell.formula = Some(FORMULAS[rng.gen_range(0..FORMULAS.len())].to_string()),
                2 => cell.locked = !cell.locked,
                3 => cell.note = Some("changed".into()),
                _ => {
                    sheet.cells.remove(&addr);
                    continue;
                }
            }
            if cell.is_empty() {
                sheet.cells.remove(&addr);
            }
        }
        for _ in 0..rng.gen_range(0..4) {
            let addr = random_addr(&mut rng);
            sheet.set(addr, random_cell(&mut rng));
        }
        if rng.gen_bool(0.2) {
            randomize_attrs(&mut rng, sheet);
        }
    }
    if rng.gen_bool(0.3) {
        let unused: Vec<&str> = SHEET_NAMES
            .iter()
            .copied()
            .filter(|n| a.sheet(n).is_none() && b.sheet(n).is_none())
            .collect();
        if let Some(name) = unused.choose(&mut rng) {
            let at = rng.gen_range(0..=b.sheets.len());
            let sheet = random_sheet(&mut rng, name);
            b.sheets.insert(at, sheet);
        }
    }
    b.security.sheet_protection_count =
        b.sheets.iter().filter(|s| s.protection_enabled).count() as u32;
    (a, b)
}
