//! Canonical workbook model and its JSON interchange format.
//!
//! Every analysis in this crate consumes [`Workbook`]. The canonical JSON
//! grammar is documented in `docs/canonical-json.md`; serialization is
//! deterministic (sheets in order, cells sorted by row then column) so that
//! byte equality of the output is a valid equality test.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

pub const MAX_COL: u32 = 16_384;
pub const MAX_ROW: u32 = 1_048_576;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorkbookError {
    #[error("malformed json: {0}")]
    MalformedJson(String),
    #[error("invariant violation at {location}: {invariant}")]
    InvariantViolation { invariant: String, location: String },
    #[error("address out of range: {0}")]
    AddressOutOfRange(String),
    #[error("malformed address: {0:?}")]
    MalformedAddress(String),
    #[error("unknown sheet: {0:?}")]
    UnknownSheet(String),
}

impl WorkbookError {
    fn invariant(invariant: impl Into<String>, location: impl Into<String>) -> Self {
        WorkbookError::InvariantViolation {
            invariant: invariant.into(),
            location: location.into(),
        }
    }
}

/// 1-based cell coordinate. Ordering is row-major: (row, col).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellAddr {
    pub col: u32,
    pub row: u32,
}

impl CellAddr {
    pub fn new(col: u32, row: u32) -> Result<Self, WorkbookError> {
        if col == 0 || row == 0 || col > MAX_COL || row > MAX_ROW {
            return Err(WorkbookError::AddressOutOfRange(format!(
                "col={col}, row={row}"
            )));
        }
        Ok(CellAddr { col, row })
    }

    pub fn a1(&self) -> String {
        addr_to_a1(*self)
    }

    /// Offsets this address, returning `None` when the result leaves the grid.
    pub fn offset(&self, d_row: i64, d_col: i64) -> Option<CellAddr> {
        let row = i64::from(self.row) + d_row;
        let col = i64::from(self.col) + d_col;
        if (1..=i64::from(MAX_ROW)).contains(&row) && (1..=i64::from(MAX_COL)).contains(&col) {
            Some(CellAddr {
                col: col as u32,
                row: row as u32,
            })
        } else {
            None
        }
    }
}

impl Ord for CellAddr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for CellAddr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CellAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&addr_to_a1(*self))
    }
}

impl FromStr for CellAddr {
    type Err = WorkbookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        a1_to_addr(s)
    }
}

impl Serialize for CellAddr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.a1())
    }
}

impl<'de> Deserialize<'de> for CellAddr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        a1_to_addr(&text).map_err(serde::de::Error::custom)
    }
}

/// Column index to letters in bijective base 26 (1 = "A", 27 = "AA").
pub fn column_letters(mut col: u32) -> String {
    let mut out = Vec::new();
    while col > 0 {
        let rem = (col - 1) % 26;
        out.push(b'A' + rem as u8);
        col = (col - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Letters to column index; `None` when not `[A-Z]+` or past [`MAX_COL`].
pub fn column_index(letters: &str) -> Option<u32> {
    if letters.is_empty() || letters.len() > 3 {
        return None;
    }
    let mut col: u32 = 0;
    for b in letters.bytes() {
        if !b.is_ascii_uppercase() {
            return None;
        }
        col = col * 26 + u32::from(b - b'A' + 1);
    }
    (col <= MAX_COL).then_some(col)
}

pub fn addr_to_a1(addr: CellAddr) -> String {
    format!("{}{}", column_letters(addr.col), addr.row)
}

/// Parses `[A-Z]+[1-9][0-9]*`. Absolute markers are handled by the formula
/// parser, not here.
pub fn a1_to_addr(text: &str) -> Result<CellAddr, WorkbookError> {
    let split = text
        .find(|c: char| !c.is_ascii_uppercase())
        .ok_or_else(|| WorkbookError::MalformedAddress(text.to_string()))?;
    let (letters, digits) = text.split_at(split);
    let well_formed = !letters.is_empty()
        && !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && !digits.starts_with('0');
    if !well_formed {
        return Err(WorkbookError::MalformedAddress(text.to_string()));
    }
    let out_of_range = || WorkbookError::AddressOutOfRange(text.to_string());
    // Letters beyond three are always past XFD.
    let col = column_index(letters).ok_or_else(out_of_range)?;
    let row: u32 = digits.parse().map_err(|_| out_of_range())?;
    CellAddr::new(col, row).map_err(|_| out_of_range())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorCode {
    Div0,
    NA,
    Name,
    Null,
    Num,
    Ref,
    Value,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::Div0,
        ErrorCode::NA,
        ErrorCode::Name,
        ErrorCode::Null,
        ErrorCode::Num,
        ErrorCode::Ref,
        ErrorCode::Value,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::Div0 => "#DIV/0!",
            ErrorCode::NA => "#N/A",
            ErrorCode::Name => "#NAME?",
            ErrorCode::Null => "#NULL!",
            ErrorCode::Num => "#NUM!",
            ErrorCode::Ref => "#REF!",
            ErrorCode::Value => "#VALUE!",
        }
    }

    pub fn parse(text: &str) -> Option<ErrorCode> {
        ErrorCode::ALL
            .into_iter()
            .find(|code| code.as_str().eq_ignore_ascii_case(text))
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number(f64),
    Text(String),
    Bool(bool),
    Error(ErrorCode),
    Blank,
}

impl CellValue {
    pub fn is_blank(&self) -> bool {
        matches!(self, CellValue::Blank)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(t) => Some(t),
            _ => None,
        }
    }

    fn type_tag(&self) -> &'static str {
        match self {
            CellValue::Number(_) => "n",
            CellValue::Text(_) => "s",
            CellValue::Bool(_) => "b",
            CellValue::Error(_) => "e",
            CellValue::Blank => "blank",
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Number(n) => write!(f, "{n}"),
            CellValue::Text(t) => write!(f, "{t:?}"),
            CellValue::Bool(b) => f.write_str(if *b { "TRUE" } else { "FALSE" }),
            CellValue::Error(e) => f.write_str(e.as_str()),
            CellValue::Blank => f.write_str("(blank)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: CellValue,
    /// A1-grammar formula without the leading `=`.
    pub formula: Option<String>,
    pub locked: bool,
    pub note: Option<String>,
}

impl Cell {
    pub fn number(n: f64) -> Self {
        Cell::constant(CellValue::Number(n))
    }

    pub fn text(t: impl Into<String>) -> Self {
        Cell::constant(CellValue::Text(t.into()))
    }

    pub fn constant(value: CellValue) -> Self {
        Cell {
            value,
            formula: None,
            locked: true,
            note: None,
        }
    }

    pub fn formula(formula: impl Into<String>, value: CellValue) -> Self {
        Cell {
            value,
            formula: Some(formula.into()),
            locked: true,
            note: None,
        }
    }

    pub fn unlocked(mut self) -> Self {
        self.locked = false;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn has_formula(&self) -> bool {
        self.formula.is_some()
    }

    /// Blank, locked, no formula and no note. Never stored in a [`Sheet`].
    /// An unlocked blank is kept: it marks an input cell awaiting data.
    pub fn is_empty(&self) -> bool {
        self.value.is_blank() && self.formula.is_none() && self.note.is_none() && self.locked
    }

    /// A non-formula cell holding a non-blank value.
    pub fn is_constant(&self) -> bool {
        self.formula.is_none() && !self.value.is_blank()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SheetPurpose {
    Input,
    Calculation,
    Output,
    Documentation,
    Log,
    #[default]
    Undeclared,
}

impl SheetPurpose {
    pub fn as_str(&self) -> &'static str {
        match self {
            SheetPurpose::Input => "input",
            SheetPurpose::Calculation => "calculation",
            SheetPurpose::Output => "output",
            SheetPurpose::Documentation => "documentation",
            SheetPurpose::Log => "log",
            SheetPurpose::Undeclared => "undeclared",
        }
    }
}

impl FromStr for SheetPurpose {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "input" | "inputs" => SheetPurpose::Input,
            "calculation" | "calculations" => SheetPurpose::Calculation,
            "output" | "outputs" => SheetPurpose::Output,
            "documentation" => SheetPurpose::Documentation,
            "log" | "logs" => SheetPurpose::Log,
            "undeclared" => SheetPurpose::Undeclared,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sheet {
    pub name: String,
    pub cells: BTreeMap<CellAddr, Cell>,
    pub protection_enabled: bool,
    pub declared_purpose: SheetPurpose,
    pub hidden: bool,
    /// Hidden row indices, ascending.
    pub hidden_rows: Vec<u32>,
    /// Hidden column indices, ascending.
    pub hidden_cols: Vec<u32>,
}

impl Sheet {
    pub fn new(name: impl Into<String>) -> Self {
        Sheet {
            name: name.into(),
            ..Sheet::default()
        }
    }

    /// Stores `cell`, or removes the address if `cell` is empty.
    pub fn set(&mut self, addr: CellAddr, cell: Cell) {
        if cell.is_empty() {
            self.cells.remove(&addr);
        } else {
            self.cells.insert(addr, cell);
        }
    }

    pub fn get(&self, addr: CellAddr) -> Option<&Cell> {
        self.cells.get(&addr)
    }

    /// Text of the cell at `addr`, trimmed; `None` unless it holds text.
    pub fn text_at(&self, addr: CellAddr) -> Option<&str> {
        self.get(addr)
            .and_then(|c| c.value.as_text())
            .map(str::trim)
    }

    /// (min row, min col, max row, max col) of populated cells.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut it = self.cells.keys();
        let first = it.next()?;
        let init = (first.row, first.col, first.row, first.col);
        Some(self.cells.keys().fold(init, |(r0, c0, r1, c1), a| {
            (r0.min(a.row), c0.min(a.col), r1.max(a.row), c1.max(a.col))
        }))
    }
}

/// Rectangular range on a named sheet. Single cells are 1x1 ranges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RangeRef {
    pub sheet: String,
    pub top_left: CellAddr,
    pub bottom_right: CellAddr,
}

impl RangeRef {
    /// Builds a range from any two corners.
    pub fn spanning(sheet: impl Into<String>, a: CellAddr, b: CellAddr) -> Self {
        RangeRef {
            sheet: sheet.into(),
            top_left: CellAddr {
                col: a.col.min(b.col),
                row: a.row.min(b.row),
            },
            bottom_right: CellAddr {
                col: a.col.max(b.col),
                row: a.row.max(b.row),
            },
        }
    }

    pub fn cell(sheet: impl Into<String>, addr: CellAddr) -> Self {
        RangeRef::spanning(sheet, addr, addr)
    }

    pub fn is_single_cell(&self) -> bool {
        self.top_left == self.bottom_right
    }

    pub fn contains(&self, addr: CellAddr) -> bool {
        (self.top_left.col..=self.bottom_right.col).contains(&addr.col)
            && (self.top_left.row..=self.bottom_right.row).contains(&addr.row)
    }

    pub fn cell_count(&self) -> u64 {
        u64::from(self.bottom_right.col - self.top_left.col + 1)
            * u64::from(self.bottom_right.row - self.top_left.row + 1)
    }

    /// Row-major iterator over the cells of the range.
    pub fn cells(&self) -> impl Iterator<Item = CellAddr> + '_ {
        (self.top_left.row..=self.bottom_right.row).flat_map(move |row| {
            (self.top_left.col..=self.bottom_right.col).map(move |col| CellAddr { col, row })
        })
    }

    /// Parses `Sheet!A1:B2`, `'My Sheet'!A1` (absolute markers ignored).
    pub fn parse(text: &str) -> Result<RangeRef, WorkbookError> {
        let malformed = || WorkbookError::MalformedAddress(text.to_string());
        let bang = text.rfind('!').ok_or_else(malformed)?;
        let (sheet_part, area) = (&text[..bang], &text[bang + 1..]);
        let sheet = if let Some(inner) = sheet_part
            .strip_prefix('\'')
            .and_then(|s| s.strip_suffix('\''))
        {
            inner.replace("''", "'")
        } else {
            sheet_part.to_string()
        };
        if sheet.is_empty() {
            return Err(malformed());
        }
        let strip = |s: &str| s.replace('$', "");
        let (a, b) = match area.split_once(':') {
            Some((a, b)) => (a1_to_addr(&strip(a))?, a1_to_addr(&strip(b))?),
            None => {
                let a = a1_to_addr(&strip(area))?;
                (a, a)
            }
        };
        Ok(RangeRef::spanning(sheet, a, b))
    }
}

impl fmt::Display for RangeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&quote_sheet_name(&self.sheet))?;
        write!(f, "!{}", self.top_left)?;
        if !self.is_single_cell() {
            write!(f, ":{}", self.bottom_right)?;
        }
        Ok(())
    }
}

impl Serialize for RangeRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RangeRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        RangeRef::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Quotes a sheet name for use in references when it is not a plain identifier.
pub fn quote_sheet_name(name: &str) -> String {
    let plain = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !name.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        && !looks_like_cell_ref(name);
    if plain {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

fn looks_like_cell_ref(name: &str) -> bool {
    let upper = name.to_ascii_uppercase();
    a1_to_addr(&upper).is_ok()
        || upper == "TRUE"
        || upper == "FALSE"
        || upper.starts_with('R') && upper[1..].bytes().all(|b| b.is_ascii_digit() || b == b'C')
}

/// A cell location qualified by sheet name. Ordered by (sheet, row, col).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub sheet: String,
    pub addr: CellAddr,
}

impl CellKey {
    pub fn new(sheet: impl Into<String>, addr: CellAddr) -> Self {
        CellKey {
            sheet: sheet.into(),
            addr,
        }
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}!{}", quote_sheet_name(&self.sheet), self.addr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SecurityInfo {
    pub encrypted: bool,
    pub sheet_protection_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    #[default]
    CanonicalJson,
    Xlsx,
    EncryptedOpaque,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Workbook {
    pub name: String,
    pub sheets: Vec<Sheet>,
    pub named_ranges: BTreeMap<String, RangeRef>,
    pub security: SecurityInfo,
    pub source_format: SourceFormat,
}

impl Workbook {
    pub fn new(name: impl Into<String>) -> Self {
        Workbook {
            name: name.into(),
            ..Workbook::default()
        }
    }

    /// Case-insensitive sheet lookup.
    pub fn sheet(&self, name: &str) -> Option<&Sheet> {
        self.sheets
            .iter()
            .find(|s| s.name == name)
            .or_else(|| self.sheets.iter().find(|s| s.name.eq_ignore_ascii_case(name)))
    }

    pub fn sheet_mut(&mut self, name: &str) -> Option<&mut Sheet> {
        let idx = self
            .sheets
            .iter()
            .position(|s| s.name.eq_ignore_ascii_case(name))?;
        self.sheets.get_mut(idx)
    }

    /// Resolves a sheet name as written in a formula to the stored name.
    pub fn canonical_sheet_name(&self, name: &str) -> Option<&str> {
        self.sheet(name).map(|s| s.name.as_str())
    }

    /// Case-insensitive named-range lookup.
    pub fn named_range(&self, name: &str) -> Option<&RangeRef> {
        self.named_ranges.get(name).or_else(|| {
            self.named_ranges
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| v)
        })
    }

    pub fn cell_count(&self) -> usize {
        self.sheets.iter().map(|s| s.cells.len()).sum()
    }

    /// Iterates `(sheet, addr, cell)` in sheet order then row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (&Sheet, CellAddr, &Cell)> {
        self.sheets
            .iter()
            .flat_map(|s| s.cells.iter().map(move |(a, c)| (s, *a, c)))
    }

    /// Checks every type invariant of the model.
    pub fn validate(&self) -> Result<(), WorkbookError> {
        let mut seen: Vec<String> = Vec::with_capacity(self.sheets.len());
        for (i, sheet) in self.sheets.iter().enumerate() {
            let location = format!("sheets[{i}]");
            if sheet.name.trim().is_empty() {
                return Err(WorkbookError::invariant("sheet name must be non-empty", location));
            }
            let folded = sheet.name.to_lowercase();
            if seen.contains(&folded) {
                return Err(WorkbookError::invariant(
                    format!("duplicate sheet name {:?} (case-insensitive)", sheet.name),
                    location,
                ));
            }
            seen.push(folded);
            for (addr, cell) in &sheet.cells {
                if cell.is_empty() {
                    return Err(WorkbookError::invariant(
                        "empty cells must not be stored",
                        format!("{}!{}", sheet.name, addr),
                    ));
                }
                if let CellValue::Number(n) = cell.value {
                    if !n.is_finite() {
                        return Err(WorkbookError::invariant(
                            "numbers must be finite",
                            format!("{}!{}", sheet.name, addr),
                        ));
                    }
                }
            }
            let sorted = |v: &[u32]| v.windows(2).all(|w| w[0] < w[1]);
            if !sorted(&sheet.hidden_rows) || !sorted(&sheet.hidden_cols) {
                return Err(WorkbookError::invariant(
                    "hidden rows/columns must be strictly ascending",
                    location,
                ));
            }
            if sheet.hidden_rows.iter().any(|&r| r == 0 || r > MAX_ROW)
                || sheet.hidden_cols.iter().any(|&c| c == 0 || c > MAX_COL)
            {
                return Err(WorkbookError::AddressOutOfRange(format!(
                    "hidden row/column index on sheet {:?}",
                    sheet.name
                )));
            }
        }
        for (name, range) in &self.named_ranges {
            if self.sheet(&range.sheet).is_none() {
                return Err(WorkbookError::invariant(
                    format!("named range targets unknown sheet {:?}", range.sheet),
                    format!("named_ranges.{name}"),
                ));
            }
        }
        if self.source_format == SourceFormat::EncryptedOpaque
            && (!self.sheets.is_empty() || !self.security.encrypted)
        {
            return Err(WorkbookError::invariant(
                "encrypted_opaque workbooks have no sheets and encrypted=true",
                "source_format",
            ));
        }
        if self.security.sheet_protection_count as usize > self.sheets.len() {
            return Err(WorkbookError::invariant(
                "sheet_protection_count exceeds number of sheets",
                "security.sheet_protection_count",
            ));
        }
        Ok(())
    }
}

/// Looks up a stored cell. `Ok(None)` for blank cells on an existing sheet.
pub fn cell_at<'a>(
    wb: &'a Workbook,
    sheet: &str,
    addr: CellAddr,
) -> Result<Option<&'a Cell>, WorkbookError> {
    let sheet = wb
        .sheet(sheet)
        .ok_or_else(|| WorkbookError::UnknownSheet(sheet.to_string()))?;
    Ok(sheet.get(addr))
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkbook {
    name: String,
    sheets: Vec<RawSheet>,
    #[serde(default)]
    named_ranges: BTreeMap<String, String>,
    #[serde(default)]
    security: Option<RawSecurity>,
    #[serde(default)]
    source_format: SourceFormat,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSecurity {
    #[serde(default)]
    encrypted: bool,
    #[serde(default)]
    sheet_protection_count: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSheet {
    name: String,
    #[serde(default)]
    protection_enabled: bool,
    #[serde(default)]
    hidden: bool,
    #[serde(default)]
    declared_purpose: SheetPurpose,
    #[serde(default)]
    hidden_rows: Vec<u32>,
    #[serde(default)]
    hidden_cols: Vec<u32>,
    #[serde(default)]
    cells: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    #[serde(default)]
    v: Option<serde_json::Value>,
    t: Option<String>,
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    locked: Option<bool>,
    #[serde(default)]
    note: Option<String>,
}

fn decode_value(raw: &RawCell, location: &str) -> Result<CellValue, WorkbookError> {
    use serde_json::Value as J;
    let bad = |what: &str| WorkbookError::invariant(what.to_string(), location.to_string());
    let tag = match (&raw.t, &raw.v) {
        (Some(t), _) => t.as_str(),
        (None, None) | (None, Some(J::Null)) => "blank",
        (None, Some(J::Number(_))) => "n",
        (None, Some(J::String(_))) => "s",
        (None, Some(J::Bool(_))) => "b",
        (None, Some(_)) => return Err(bad("unsupported cell value")),
    };
    Ok(match (tag, &raw.v) {
        ("n", Some(J::Number(n))) => {
            CellValue::Number(n.as_f64().ok_or_else(|| bad("number not representable"))?)
        }
        ("s", Some(J::String(s))) => CellValue::Text(s.clone()),
        ("b", Some(J::Bool(b))) => CellValue::Bool(*b),
        ("e", Some(J::String(s))) => CellValue::Error(
            ErrorCode::parse(s).ok_or_else(|| bad("unknown error code"))?,
        ),
        ("blank", None) | ("blank", Some(J::Null)) => CellValue::Blank,
        ("n" | "s" | "b" | "e" | "blank", _) => {
            return Err(bad(&format!("value does not match type tag {tag:?}")))
        }
        _ => return Err(bad(&format!("unknown type tag {tag:?}"))),
    })
}

/// Parses canonical workbook JSON, enforcing every model invariant.
pub fn parse_canonical(json_text: &str) -> Result<Workbook, WorkbookError> {
    let raw: RawWorkbook =
        serde_json::from_str(json_text).map_err(|e| WorkbookError::MalformedJson(e.to_string()))?;
    let mut wb = Workbook::new(raw.name);
    wb.source_format = raw.source_format;
    for raw_sheet in raw.sheets {
        let mut sheet = Sheet::new(raw_sheet.name);
        sheet.protection_enabled = raw_sheet.protection_enabled;
        sheet.hidden = raw_sheet.hidden;
        sheet.declared_purpose = raw_sheet.declared_purpose;
        sheet.hidden_rows = raw_sheet.hidden_rows;
        sheet.hidden_cols = raw_sheet.hidden_cols;
        for (key, value) in raw_sheet.cells {
            let addr = a1_to_addr(&key)?;
            let location = format!("{}!{}", sheet.name, key);
            let raw_cell: RawCell = serde_json::from_value(value)
                .map_err(|e| WorkbookError::MalformedJson(format!("{location}: {e}")))?;
            let cell = Cell {
                value: decode_value(&raw_cell, &location)?,
                formula: raw_cell.f.map(|f| f.strip_prefix('=').map(str::to_string).unwrap_or(f)),
                locked: raw_cell.locked.unwrap_or(true),
                note: raw_cell.note,
            };
            if cell.is_empty() {
                return Err(WorkbookError::invariant("empty cells must not be stored", location));
            }
            sheet.cells.insert(addr, cell);
        }
        wb.sheets.push(sheet);
    }
    for (name, target) in raw.named_ranges {
        let range = RangeRef::parse(&target).map_err(|e| match e {
            WorkbookError::AddressOutOfRange(_) => e,
            other => WorkbookError::invariant(other.to_string(), format!("named_ranges.{name}")),
        })?;
        wb.named_ranges.insert(name, range);
    }
    let protected = wb.sheets.iter().filter(|s| s.protection_enabled).count() as u32;
    wb.security = match raw.security {
        Some(s) => SecurityInfo {
            encrypted: s.encrypted,
            sheet_protection_count: s.sheet_protection_count.unwrap_or(protected),
        },
        None => SecurityInfo {
            encrypted: false,
            sheet_protection_count: protected,
        },
    };
    wb.validate()?;
    Ok(wb)
}

struct CellsJson<'a>(&'a BTreeMap<CellAddr, Cell>);

impl Serialize for CellsJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (addr, cell) in self.0 {
            map.serialize_entry(&addr.a1(), &CellJson(cell))?;
        }
        map.end()
    }
}

struct CellJson<'a>(&'a Cell);

impl Serialize for CellJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let cell = self.0;
        let mut st = serializer.serialize_struct("Cell", 5)?;
        match &cell.value {
            CellValue::Number(n) => st.serialize_field("v", n)?,
            CellValue::Text(t) => st.serialize_field("v", t)?,
            CellValue::Bool(b) => st.serialize_field("v", b)?,
            CellValue::Error(e) => st.serialize_field("v", e.as_str())?,
            CellValue::Blank => st.skip_field("v")?,
        }
        st.serialize_field("t", cell.value.type_tag())?;
        match &cell.formula {
            Some(f) => st.serialize_field("f", f)?,
            None => st.skip_field("f")?,
        }
        st.serialize_field("locked", &cell.locked)?;
        match &cell.note {
            Some(n) => st.serialize_field("note", n)?,
            None => st.skip_field("note")?,
        }
        st.end()
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CellJson(self).serialize(serializer)
    }
}

/// Same shape as a cell entry in canonical JSON.
impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RawCell::deserialize(deserializer)?;
        Ok(Cell {
            value: decode_value(&raw, "cell").map_err(serde::de::Error::custom)?,
            formula: raw.f.map(|f| f.strip_prefix('=').map(str::to_string).unwrap_or(f)),
            locked: raw.locked.unwrap_or(true),
            note: raw.note,
        })
    }
}

struct SheetJson<'a>(&'a Sheet);

impl Serialize for SheetJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let sheet = self.0;
        let mut st = serializer.serialize_struct("Sheet", 7)?;
        st.serialize_field("name", &sheet.name)?;
        st.serialize_field("protection_enabled", &sheet.protection_enabled)?;
        st.serialize_field("hidden", &sheet.hidden)?;
        st.serialize_field("declared_purpose", &sheet.declared_purpose)?;
        if sheet.hidden_rows.is_empty() {
            st.skip_field("hidden_rows")?;
        } else {
            st.serialize_field("hidden_rows", &sheet.hidden_rows)?;
        }
        if sheet.hidden_cols.is_empty() {
            st.skip_field("hidden_cols")?;
        } else {
            st.serialize_field("hidden_cols", &sheet.hidden_cols)?;
        }
        st.serialize_field("cells", &CellsJson(&sheet.cells))?;
        st.end()
    }
}

impl Serialize for Workbook {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Workbook", 5)?;
        st.serialize_field("name", &self.name)?;
        let sheets: Vec<SheetJson<'_>> = self.sheets.iter().map(SheetJson).collect();
        st.serialize_field("sheets", &sheets)?;
        let named: BTreeMap<&str, String> = self
            .named_ranges
            .iter()
            .map(|(k, v)| (k.as_str(), v.to_string()))
            .collect();
        st.serialize_field("named_ranges", &named)?;
        st.serialize_field("security", &self.security)?;
        st.serialize_field("source_format", &self.source_format)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Workbook {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        parse_canonical(&value.to_string()).map_err(serde::de::Error::custom)
    }
}

/// Deterministic compact serialization.
pub fn serialize_canonical(wb: &Workbook) -> String {
    serde_json::to_string(wb).expect("workbook serialization is infallible")
}

/// Indented variant of [`serialize_canonical`] for human-facing files.
pub fn serialize_canonical_pretty(wb: &Workbook) -> String {
    serde_json::to_string_pretty(wb).expect("workbook serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> CellAddr {
        a1_to_addr(s).unwrap()
    }

    #[test]
    fn a1_conversion_examples() {
        assert_eq!(addr_to_a1(CellAddr::new(1, 1).unwrap()), "A1");
        assert_eq!(addr_to_a1(CellAddr::new(27, 2).unwrap()), "AA2");
        assert_eq!(addr_to_a1(CellAddr::new(703, 1).unwrap()), "AAA1");
        assert_eq!(addr_to_a1(CellAddr::new(16_384, 1_048_576).unwrap()), "XFD1048576");
        assert_eq!(addr("AA2"), CellAddr { col: 27, row: 2 });
    }

    #[test]
    fn a1_rejects_malformed_and_out_of_range() {
        for bad in ["", "A", "1", "A0", "a1", "A01", "$A$1", "A1B", "A-1"] {
            assert!(
                matches!(a1_to_addr(bad), Err(WorkbookError::MalformedAddress(_))),
                "{bad}"
            );
        }
        for far in ["XFE1", "AAAA1", "A1048577", "A99999999999"] {
            assert!(
                matches!(a1_to_addr(far), Err(WorkbookError::AddressOutOfRange(_))),
                "{far}"
            );
        }
    }

    #[test]
    fn minimal_document_parses() {
        let wb = parse_canonical(r#"{"name":"w","sheets":[]}"#).unwrap();
        assert_eq!(wb.name, "w");
        assert!(wb.sheets.is_empty());
        assert_eq!(
            serialize_canonical(&wb),
            r#"{"name":"w","sheets":[],"named_ranges":{},"security":{"encrypted":false,"sheet_protection_count":0},"source_format":"canonical_json"}"#
        );
    }

    #[test]
    fn single_locked_cell() {
        let wb = parse_canonical(
            r#"{"name":"w","sheets":[{"name":"S","cells":{"A1":{"v":5,"t":"n","locked":true}}}]}"#,
        )
        .unwrap();
        assert_eq!(wb.cell_count(), 1);
        let cell = cell_at(&wb, "S", addr("A1")).unwrap().unwrap();
        assert!(cell.locked);
        assert_eq!(cell.value, CellValue::Number(5.0));
    }

    #[test]
    fn locked_defaults_to_true() {
        let wb = parse_canonical(
            r#"{"name":"w","sheets":[{"name":"S","cells":{"B2":{"v":"x","t":"s"}}}]}"#,
        )
        .unwrap();
        assert!(wb.sheets[0].cells[&addr("B2")].locked);
    }

    #[test]
    fn duplicate_sheet_names_rejected() {
        let err = parse_canonical(
            r#"{"name":"w","sheets":[{"name":"Data","cells":{}},{"name":"data","cells":{}}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, WorkbookError::InvariantViolation { .. }), "{err}");
    }

    #[test]
    fn rejects_unknown_fields_and_bad_json() {
        assert!(matches!(
            parse_canonical(r#"{"name":"w","sheets":[],"extra":1}"#),
            Err(WorkbookError::MalformedJson(_))
        ));
        assert!(matches!(parse_canonical("{"), Err(WorkbookError::MalformedJson(_))));
    }

    #[test]
    fn rejects_bad_cells() {
        let out_of_range = r#"{"name":"w","sheets":[{"name":"S","cells":{"XFE1":{"v":1,"t":"n"}}}]}"#;
        assert!(matches!(
            parse_canonical(out_of_range),
            Err(WorkbookError::AddressOutOfRange(_))
        ));
        let empty = r#"{"name":"w","sheets":[{"name":"S","cells":{"A1":{"t":"blank"}}}]}"#;
        assert!(matches!(
            parse_canonical(empty),
            Err(WorkbookError::InvariantViolation { .. })
        ));
        let bad_err = r##"{"name":"w","sheets":[{"name":"S","cells":{"A1":{"v":"#OOPS","t":"e"}}}]}"##;
        assert!(parse_canonical(bad_err).is_err());
        let mismatch = r#"{"name":"w","sheets":[{"name":"S","cells":{"A1":{"v":"x","t":"n"}}}]}"#;
        assert!(parse_canonical(mismatch).is_err());
    }

    #[test]
    fn named_range_must_target_existing_sheet() {
        let doc = r#"{"name":"w","sheets":[{"name":"S","cells":{}}],"named_ranges":{"CHK_X":"Other!A1"}}"#;
        assert!(matches!(
            parse_canonical(doc),
            Err(WorkbookError::InvariantViolation { .. })
        ));
        let ok = r#"{"name":"w","sheets":[{"name":"My Sheet","cells":{}}],"named_ranges":{"CHK_X":"'My Sheet'!$A$1:B2"}}"#;
        let wb = parse_canonical(ok).unwrap();
        let r = &wb.named_ranges["CHK_X"];
        assert_eq!(r.sheet, "My Sheet");
        assert_eq!(r.to_string(), "'My Sheet'!A1:B2");
    }

    #[test]
    fn encrypted_opaque_invariant() {
        let bad = r#"{"name":"w","sheets":[{"name":"S","cells":{}}],"source_format":"encrypted_opaque","security":{"encrypted":true,"sheet_protection_count":0}}"#;
        assert!(parse_canonical(bad).is_err());
        let ok = r#"{"name":"w","sheets":[],"source_format":"encrypted_opaque","security":{"encrypted":true,"sheet_protection_count":0}}"#;
        assert!(parse_canonical(ok).is_ok());
    }

    #[test]
    fn cell_at_distinguishes_blank_from_unknown_sheet() {
        let mut wb = Workbook::new("w");
        let mut s = Sheet::new("S");
        s.set(addr("A1"), Cell::number(1.0));
        wb.sheets.push(s);
        assert!(cell_at(&wb, "S", addr("A1")).unwrap().is_some());
        assert!(cell_at(&wb, "S", addr("B9")).unwrap().is_none());
        assert!(matches!(
            cell_at(&wb, "Nope", addr("A1")),
            Err(WorkbookError::UnknownSheet(_))
        ));
    }

    #[test]
    fn serialization_orders_cells_row_major() {
        let mut wb = Workbook::new("w");
        let mut s = Sheet::new("S");
        s.set(addr("B1"), Cell::number(2.0));
        s.set(addr("A2"), Cell::number(3.0));
        s.set(addr("A10"), Cell::number(4.0));
        s.set(addr("A1"), Cell::formula("B1*2", CellValue::Number(4.0)).unlocked());
        wb.sheets.push(s);
        let json = serialize_canonical(&wb);
        let keys: Vec<usize> = ["\"A1\"", "\"B1\"", "\"A2\"", "\"A10\""]
            .iter()
            .map(|k| json.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{json}");
        assert_eq!(parse_canonical(&json).unwrap(), wb);
        assert_eq!(serialize_canonical(&wb), json);
    }

    #[test]
    fn quoting_sheet_names() {
        assert_eq!(quote_sheet_name("Data"), "Data");
        assert_eq!(quote_sheet_name("My Sheet"), "'My Sheet'");
        assert_eq!(quote_sheet_name("A1"), "'A1'");
        assert_eq!(quote_sheet_name("O'Brien"), "'O''Brien'");
        assert_eq!(quote_sheet_name("2024"), "'2024'");
    }
}
