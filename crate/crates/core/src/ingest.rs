//! Import of the zipped-XML spreadsheet format into the canonical model, and
//! detection of compound-file (password-protected) containers.
//!
//! Supported: cell values, formulas (including shared formulas), shared and
//! inline strings, the cellXfs locked flag, sheet protection, hidden sheets,
//! rows and columns, and defined names. Presentation-only elements (views,
//! column widths, page setup) are dropped silently; any other construct is
//! skipped with a warning.

use std::collections::HashMap;
use std::io::{Cursor, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zip::result::ZipError;
use zip::ZipArchive;

use crate::docsheet::{apply_declared_purposes, DEFAULT_DOC_SHEET};
use crate::formula::{parse_formula, print_formula, shift_relative, Expr};
use crate::workbook::{
    a1_to_addr, parse_canonical, Cell, CellAddr, CellValue, ErrorCode, RangeRef,
    SecurityInfo, Sheet, SourceFormat, Workbook, WorkbookError, MAX_COL, MAX_ROW,
};

const ZIP_MAGIC: [u8; 4] = [0x50, 0x4B, 0x03, 0x04];
const CFB_MAGIC: [u8; 8] = [0xD0, 0xCF, 0x11, 0xE0, 0xA1, 0xB1, 0x1A, 0xE1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    XlsxZip,
    CfbEncrypted,
    Unknown,
}

pub fn sniff_format(bytes: &[u8]) -> FileKind {
    if bytes.starts_with(&ZIP_MAGIC) {
        FileKind::XlsxZip
    } else if bytes.starts_with(&CFB_MAGIC) {
        FileKind::CfbEncrypted
    } else {
        FileKind::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestWarning {
    pub code: String,
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub workbook: Workbook,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("not a spreadsheet: neither a zip nor a compound-file container")]
    NotASpreadsheet,
    #[error("corrupt zip container: {0}")]
    CorruptZip(String),
    #[error("missing required part {0}")]
    MissingRequiredPart(String),
    #[error("malformed XML in {part}: {message}")]
    MalformedPart { part: String, message: String },
    #[error(transparent)]
    Workbook(#[from] WorkbookError),
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::NotASpreadsheet => "not-a-spreadsheet",
            IngestError::CorruptZip(_) => "corrupt-zip",
            IngestError::MissingRequiredPart(_) => "missing-required-part",
            IngestError::MalformedPart { .. } => "malformed-part",
            IngestError::Workbook(_) => "invalid-workbook",
        }
    }
}

/// Loads canonical JSON or a sniffed spreadsheet container. `name` becomes
/// the workbook name for containers, which carry none of their own.
pub fn load_workbook(bytes: &[u8], name: &str) -> Result<IngestReport, IngestError> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| WorkbookError::MalformedJson(e.to_string()))?;
        return Ok(IngestReport {
            workbook: parse_canonical(text)?,
            warnings: Vec::new(),
        });
    }
    import_xlsx_named(bytes, name)
}

pub fn import_xlsx(bytes: &[u8]) -> Result<IngestReport, IngestError> {
    import_xlsx_named(bytes, "workbook")
}

pub fn import_xlsx_named(bytes: &[u8], name: &str) -> Result<IngestReport, IngestError> {
    match sniff_format(bytes) {
        FileKind::Unknown => Err(IngestError::NotASpreadsheet),
        FileKind::CfbEncrypted => {
            let mut workbook = Workbook::new(name);
            workbook.security = SecurityInfo {
                encrypted: true,
                sheet_protection_count: 0,
            };
            workbook.source_format = SourceFormat::EncryptedOpaque;
            Ok(IngestReport {
                workbook,
                warnings: vec![IngestWarning {
                    code: "encrypted-container".into(),
                    location: "(file)".into(),
                    message: "compound-file container treated as password-protected; contents not inspected".into(),
                }],
            })
        }
        FileKind::XlsxZip => Importer::open(bytes, name)?.run(),
    }
}

#[derive(Debug, Default)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    text: String,
}

impl Node {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn flag(&self, name: &str) -> bool {
        matches!(self.attr(name), Some("1" | "true"))
    }

    fn child(&self, name: &str) -> Option<&Node> {
        self.children.iter().find(|c| c.name == name)
    }

    fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

fn element(e: &BytesStart<'_>) -> Result<Node, String> {
    let mut node = Node {
        name: String::from_utf8_lossy(e.local_name().as_ref()).into_owned(),
        ..Node::default()
    };
    for attr in e.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.local_name().as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| e.to_string())?.into_owned();
        node.attrs.push((key, value));
    }
    Ok(node)
}

/// Parses a whole part into a tree, keyed by local names.
fn parse_xml(bytes: &[u8]) -> Result<Node, String> {
    let mut reader = Reader::from_reader(bytes);
    let mut stack = vec![Node::default()];
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf).map_err(|e| e.to_string())? {
            Event::Start(e) => stack.push(element(&e)?),
            Event::Empty(e) => {
                let node = element(&e)?;
                stack.last_mut().unwrap().children.push(node);
            }
            Event::End(_) => {
                let node = stack.pop().unwrap();
                let parent = stack.last_mut().ok_or("unbalanced end tag")?;
                parent.children.push(node);
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| e.to_string())?;
                stack.last_mut().unwrap().text.push_str(&text);
            }
            Event::CData(c) => {
                let text = String::from_utf8_lossy(&c).into_owned();
                stack.last_mut().unwrap().text.push_str(&text);
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if stack.len() != 1 {
        return Err("unexpected end of document".into());
    }
    stack
        .pop()
        .unwrap()
        .children
        .into_iter()
        .next()
        .ok_or_else(|| "no root element".into())
}

/// Text of a string item: plain `<t>` or the runs of rich text, without
/// phonetic hints.
fn string_item(node: &Node) -> String {
    match node.name.as_str() {
        "t" => node.text.clone(),
        "rPh" | "phoneticPr" => String::new(),
        _ => node.children.iter().map(string_item).collect(),
    }
}

// Worksheet children that only affect presentation.
const PRESENTATION: [&str; 13] = [
    "sheetPr",
    "dimension",
    "sheetViews",
    "sheetFormatPr",
    "cols",
    "sheetData",
    "sheetProtection",
    "pageMargins",
    "pageSetup",
    "printOptions",
    "headerFooter",
    "rowBreaks",
    "colBreaks",
];

const WORKBOOK_IGNORED: [&str; 8] = [
    "fileVersion",
    "fileSharing",
    "workbookPr",
    "bookViews",
    "sheets",
    "definedNames",
    "calcPr",
    "AlternateContent",
];

const EXTRA_PARTS: [(&str, &str); 9] = [
    ("xl/vbaProject.bin", "vba-project"),
    ("xl/charts/", "chart"),
    ("xl/chartsheets/", "chartsheet"),
    ("xl/pivotTables/", "pivot-table"),
    ("xl/pivotCache/", "pivot-cache"),
    ("xl/drawings/", "drawing"),
    ("xl/externalLinks/", "external-link"),
    ("xl/tables/", "table"),
    ("xl/connections.xml", "data-connection"),
];

struct SharedFormula {
    origin: CellAddr,
    text: String,
    ast: Option<Expr>,
}

struct Importer {
    zip: ZipArchive<Cursor<Vec<u8>>>,
    name: String,
    warnings: Vec<IngestWarning>,
}

impl Importer {
    fn open(bytes: &[u8], name: &str) -> Result<Self, IngestError> {
        let zip = ZipArchive::new(Cursor::new(bytes.to_vec()))
            .map_err(|e| IngestError::CorruptZip(e.to_string()))?;
        Ok(Importer {
            zip,
            name: name.to_string(),
            warnings: Vec::new(),
        })
    }

    fn warn(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(IngestWarning {
            code: code.to_string(),
            location: location.into(),
            message: message.into(),
        });
    }

    fn read_part(&mut self, path: &str) -> Result<Option<Node>, IngestError> {
        let bytes = match self.zip.by_name(path) {
            Ok(mut file) => {
                let mut bytes = Vec::new();
                file.read_to_end(&mut bytes)
                    .map_err(|e| IngestError::CorruptZip(format!("{path}: {e}")))?;
                bytes
            }
            Err(ZipError::FileNotFound) => return Ok(None),
            Err(e) => return Err(IngestError::CorruptZip(format!("{path}: {e}"))),
        };
        parse_xml(&bytes)
            .map(Some)
            .map_err(|message| IngestError::MalformedPart {
                part: path.to_string(),
                message,
            })
    }

    fn required(&mut self, path: &str) -> Result<Node, IngestError> {
        self.read_part(path)?
            .ok_or_else(|| IngestError::MissingRequiredPart(path.to_string()))
    }

    fn run(mut self) -> Result<IngestReport, IngestError> {
        let book = self.required("xl/workbook.xml")?;
        let rels = self.relationships()?;
        let strings = self.shared_strings()?;
        let locked = self.locked_styles()?;
        self.note_extra_parts();

        for child in &book.children {
            // Some writers emit an empty <workbookProtection/>, which locks nothing.
            let inert = child.name == "workbookProtection" && child.attrs.is_empty();
            if !inert && !WORKBOOK_IGNORED.contains(&child.name.as_str()) {
                self.warn(
                    "unsupported-element",
                    "xl/workbook.xml",
                    format!("<{}> not imported", child.name),
                );
            }
        }

        let mut wb = Workbook::new(self.name.clone());
        wb.source_format = SourceFormat::Xlsx;
        let sheet_nodes: Vec<&Node> = book
            .child("sheets")
            .map(|s| s.all("sheet").collect())
            .unwrap_or_default();
        // Position in <sheets> -> index in wb.sheets, for sheet-scoped names.
        let mut positions: HashMap<usize, usize> = HashMap::new();
        for (i, node) in sheet_nodes.iter().enumerate() {
            let name = node.attr("name").unwrap_or_default().to_string();
            let location = format!("sheet {name:?}");
            if name.trim().is_empty() || wb.sheet(&name).is_some() {
                self.warn("duplicate-sheet", location, "sheet skipped: empty or duplicate name");
                continue;
            }
            let path = match node.attr("id").and_then(|id| rels.get(id)) {
                Some((kind, target)) if kind.ends_with("/worksheet") => target.clone(),
                Some((kind, _)) => {
                    let kind = kind.rsplit('/').next().unwrap_or(kind).to_string();
                    self.warn("unsupported-sheet-type", location, format!("{kind} not imported"));
                    continue;
                }
                None => {
                    let guess = format!("xl/worksheets/sheet{}.xml", i + 1);
                    self.warn(
                        "missing-relationship",
                        location,
                        format!("no relationship for sheet; assuming {guess}"),
                    );
                    guess
                }
            };
            let xml = self.required(&path)?;
            let mut sheet = self.worksheet(&name, &path, &xml, &strings, &locked);
            sheet.hidden = matches!(node.attr("state"), Some("hidden" | "veryHidden"));
            positions.insert(i, wb.sheets.len());
            wb.sheets.push(sheet);
        }

        if let Some(names) = book.child("definedNames") {
            for node in names.all("definedName") {
                self.defined_name(&mut wb, node, &positions);
            }
        }

        wb.security.sheet_protection_count =
            wb.sheets.iter().filter(|s| s.protection_enabled).count() as u32;
        for problem in apply_declared_purposes(&mut wb, DEFAULT_DOC_SHEET) {
            self.warn("declared-purpose", format!("sheet {DEFAULT_DOC_SHEET:?}"), problem);
        }
        wb.validate()?;
        Ok(IngestReport {
            workbook: wb,
            warnings: self.warnings,
        })
    }

    fn relationships(&mut self) -> Result<HashMap<String, (String, String)>, IngestError> {
        let Some(rels) = self.read_part("xl/_rels/workbook.xml.rels")? else {
            return Ok(HashMap::new());
        };
        let mut out = HashMap::new();
        for rel in rels.all("Relationship") {
            let (Some(id), Some(kind), Some(target)) =
                (rel.attr("Id"), rel.attr("Type"), rel.attr("Target"))
            else {
                continue;
            };
            let path = match target.strip_prefix('/') {
                Some(absolute) => absolute.to_string(),
                None => format!("xl/{target}"),
            };
            out.insert(id.to_string(), (kind.to_string(), path));
        }
        Ok(out)
    }

    fn shared_strings(&mut self) -> Result<Vec<String>, IngestError> {
        Ok(self
            .read_part("xl/sharedStrings.xml")?
            .map(|sst| sst.all("si").map(string_item).collect())
            .unwrap_or_default())
    }

    /// Locked flag per cellXfs entry; entries without `<protection>` are locked.
    fn locked_styles(&mut self) -> Result<Vec<bool>, IngestError> {
        let Some(styles) = self.read_part("xl/styles.xml")? else {
            return Ok(Vec::new());
        };
        Ok(styles
            .child("cellXfs")
            .map(|xfs| {
                xfs.all("xf")
                    .map(|xf| {
                        xf.child("protection")
                            .and_then(|p| p.attr("locked"))
                            .is_none_or(|v| v == "1" || v == "true")
                    })
                    .collect()
            })
            .unwrap_or_default())
    }

    fn note_extra_parts(&mut self) {
        let names: Vec<String> = self.zip.file_names().map(str::to_string).collect();
        let mut sorted = names;
        sorted.sort();
        for path in sorted {
            let comment = path.starts_with("xl/comments") || path.starts_with("xl/threadedComments");
            let code = if comment {
                Some("comments")
            } else {
                EXTRA_PARTS
                    .iter()
                    .find(|(prefix, _)| path.starts_with(prefix))
                    .map(|(_, code)| *code)
            };
            if let Some(code) = code {
                if path.ends_with(".rels") {
                    continue;
                }
                self.warn(code, path.clone(), "part not imported");
            }
        }
    }

    fn worksheet(
        &mut self,
        name: &str,
        path: &str,
        xml: &Node,
        strings: &[String],
        locked: &[bool],
    ) -> Sheet {
        let mut sheet = Sheet::new(name);
        for child in &xml.children {
            if !PRESENTATION.contains(&child.name.as_str()) {
                self.warn(
                    "unsupported-element",
                    format!("sheet {name:?}"),
                    format!("<{}> not imported", child.name),
                );
            }
        }
        sheet.protection_enabled = xml
            .child("sheetProtection")
            .is_some_and(|p| !matches!(p.attr("sheet"), Some("0" | "false")));
        for cols in xml.all("cols") {
            for col in cols.all("col").filter(|c| c.flag("hidden")) {
                let min = col.attr("min").and_then(|v| v.parse::<u32>().ok());
                let max = col.attr("max").and_then(|v| v.parse::<u32>().ok());
                match (min, max) {
                    (Some(min), Some(max)) if min >= 1 && min <= max => {
                        sheet.hidden_cols.extend(min..=max.min(MAX_COL));
                    }
                    _ => self.warn("bad-column-range", path, "hidden <col> without valid min/max"),
                }
            }
        }
        let mut shared: HashMap<String, SharedFormula> = HashMap::new();
        let mut last_row = 0u32;
        for row in xml.child("sheetData").iter().flat_map(|d| d.all("row")) {
            let r = match row.attr("r").map(str::parse::<u32>) {
                Some(Ok(r)) if (1..=MAX_ROW).contains(&r) => r,
                None => last_row + 1,
                Some(_) => {
                    self.warn("bad-row", path, "row with invalid index skipped");
                    continue;
                }
            };
            last_row = r;
            if row.flag("hidden") {
                sheet.hidden_rows.push(r);
            }
            let mut last_col = 0u32;
            for c in row.all("c") {
                let addr = match c.attr("r") {
                    Some(text) => match a1_to_addr(text) {
                        Ok(addr) => addr,
                        Err(_) => {
                            self.warn("bad-cell-reference", path, format!("cell {text:?} skipped"));
                            continue;
                        }
                    },
                    None => CellAddr {
                        col: last_col + 1,
                        row: r,
                    },
                };
                last_col = addr.col;
                let location = format!("{name}!{addr}");
                let cell = self.cell(c, addr, &location, strings, locked, &mut shared);
                sheet.set(addr, cell);
            }
        }
        sheet.hidden_rows.sort_unstable();
        sheet.hidden_rows.dedup();
        sheet.hidden_cols.sort_unstable();
        sheet.hidden_cols.dedup();
        sheet
    }

    fn cell(
        &mut self,
        c: &Node,
        addr: CellAddr,
        location: &str,
        strings: &[String],
        locked: &[bool],
        shared: &mut HashMap<String, SharedFormula>,
    ) -> Cell {
        let style = c.attr("s").and_then(|s| s.parse::<usize>().ok()).unwrap_or(0);
        let is_locked = match locked.get(style) {
            Some(l) => *l,
            None => {
                if style != 0 {
                    self.warn("style-index", location, format!("style {style} not in cellXfs; assuming locked"));
                }
                true
            }
        };
        let formula = c.child("f").and_then(|f| self.formula(f, addr, location, shared));
        let raw = c.child("v").map(|v| v.text.as_str());
        let value = match c.attr("t").unwrap_or("n") {
            "s" => match raw.map(|v| v.trim().parse::<usize>()) {
                Some(Ok(i)) if i < strings.len() => CellValue::Text(strings[i].clone()),
                Some(_) => {
                    self.warn("shared-string-index", location, format!("shared string {:?} out of range", raw.unwrap_or("")));
                    CellValue::Blank
                }
                None => CellValue::Blank,
            },
            "str" => raw.map_or(CellValue::Blank, |v| CellValue::Text(v.to_string())),
            "inlineStr" => c
                .child("is")
                .map_or(CellValue::Blank, |is| CellValue::Text(string_item(is))),
            "b" => match raw.map(str::trim) {
                Some("1" | "true") => CellValue::Bool(true),
                Some("0" | "false") => CellValue::Bool(false),
                None => CellValue::Blank,
                Some(other) => {
                    self.warn("bad-value", location, format!("boolean {other:?} not understood"));
                    CellValue::Blank
                }
            },
            "e" => match raw.map(str::trim) {
                None => CellValue::Blank,
                Some(code) => match ErrorCode::parse(code) {
                    Some(e) => CellValue::Error(e),
                    None => {
                        self.warn("unsupported-error-code", location, format!("error {code} kept as text"));
                        CellValue::Text(code.to_string())
                    }
                },
            },
            "d" => {
                self.warn("date-cell", location, "ISO date cell kept as text");
                raw.map_or(CellValue::Blank, |v| CellValue::Text(v.to_string()))
            }
            "n" => match raw.map(|v| v.trim().parse::<f64>()) {
                Some(Ok(n)) if n.is_finite() => CellValue::Number(n),
                None => CellValue::Blank,
                Some(_) => {
                    self.warn("bad-value", location, format!("number {:?} not understood", raw.unwrap_or("")));
                    CellValue::Blank
                }
            },
            other => {
                self.warn("bad-value", location, format!("cell type {other:?} not understood"));
                CellValue::Blank
            }
        };
        Cell {
            value,
            formula,
            locked: is_locked,
            note: None,
        }
    }

    fn formula(
        &mut self,
        f: &Node,
        addr: CellAddr,
        location: &str,
        shared: &mut HashMap<String, SharedFormula>,
    ) -> Option<String> {
        let text = f.text.trim();
        let text = text.strip_prefix('=').unwrap_or(text).to_string();
        match f.attr("t").unwrap_or("normal") {
            "normal" => (!text.is_empty()).then_some(text),
            "array" => {
                self.warn("array-formula", location, "array formula kept as plain formula text");
                (!text.is_empty()).then_some(text)
            }
            "shared" => {
                let si = f.attr("si").unwrap_or_default().to_string();
                if !text.is_empty() {
                    let ast = parse_formula(&text).ok();
                    shared.insert(
                        si,
                        SharedFormula {
                            origin: addr,
                            text: text.clone(),
                            ast,
                        },
                    );
                    return Some(text);
                }
                let expanded = shared.get(&si).and_then(|master| {
                    let d_row = i64::from(addr.row) - i64::from(master.origin.row);
                    let d_col = i64::from(addr.col) - i64::from(master.origin.col);
                    let ast = master.ast.as_ref()?;
                    shift_relative(ast, d_row, d_col).map(|moved| print_formula(&moved))
                });
                if expanded.is_none() {
                    let detail = match shared.get(&si) {
                        Some(master) => format!("shared formula {:?} could not be shifted", master.text),
                        None => format!("shared formula index {si:?} has no master cell"),
                    };
                    self.warn("shared-formula", location, detail);
                }
                expanded
            }
            other => {
                self.warn("unsupported-formula", location, format!("{other} formula not imported"));
                None
            }
        }
    }

    fn defined_name(&mut self, wb: &mut Workbook, node: &Node, positions: &HashMap<usize, usize>) {
        let name = node.attr("name").unwrap_or_default().to_string();
        let location = format!("name {name:?}");
        if name.starts_with("_xlnm.") {
            self.warn("builtin-name", location, "built-in name not imported");
            return;
        }
        let target = node.text.trim();
        let range = match RangeRef::parse(target) {
            Ok(r) => r,
            Err(_) => {
                self.warn("unsupported-defined-name", location, format!("{target:?} is not a single range"));
                return;
            }
        };
        let Some(sheet) = wb.canonical_sheet_name(&range.sheet).map(str::to_string) else {
            self.warn("unsupported-defined-name", location, format!("{target:?} refers to a missing sheet"));
            return;
        };
        if let Some(scope) = node.attr("localSheetId").and_then(|v| v.parse::<usize>().ok()) {
            let scope = positions
                .get(&scope)
                .map_or("?".to_string(), |&i| wb.sheets[i].name.clone());
            self.warn("sheet-scoped-name", location.clone(), format!("scoped to {scope:?}; imported as workbook-level"));
        }
        if wb.named_range(&name).is_some() {
            self.warn("duplicate-name", location, "name already defined; skipped");
            return;
        }
        wb.named_ranges.insert(name, RangeRef { sheet, ..range });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sniffing() {
        assert_eq!(sniff_format(&[0x50, 0x4B, 0x03, 0x04, 0, 0]), FileKind::XlsxZip);
        assert_eq!(sniff_format(&CFB_MAGIC), FileKind::CfbEncrypted);
        assert_eq!(sniff_format(&[]), FileKind::Unknown);
        assert_eq!(sniff_format(b"PK"), FileKind::Unknown);
        assert_eq!(sniff_format(b"{\"name\":1}"), FileKind::Unknown);
    }

    #[test]
    fn cfb_is_encrypted_opaque() {
        let mut bytes = CFB_MAGIC.to_vec();
        bytes.resize(512, 0);
        let report = import_xlsx(&bytes).unwrap();
        assert_eq!(report.workbook.source_format, SourceFormat::EncryptedOpaque);
        assert!(report.workbook.security.encrypted);
        assert!(report.workbook.sheets.is_empty());
        assert_eq!(report.warnings.len(), 1);
        report.workbook.validate().unwrap();
    }

    #[test]
    fn errors() {
        assert_eq!(import_xlsx(b"hello").unwrap_err().code(), "not-a-spreadsheet");
        let mut truncated = ZIP_MAGIC.to_vec();
        truncated.extend_from_slice(&[0; 20]);
        assert_eq!(import_xlsx(&truncated).unwrap_err().code(), "corrupt-zip");
    }

    #[test]
    fn xml_tree() {
        let node = parse_xml(br#"<?xml version="1.0"?><a x:k="1"><b>t&amp;u</b><c/></a>"#).unwrap();
        assert_eq!(node.name, "a");
        assert_eq!(node.attr("k"), Some("1"));
        assert_eq!(node.child("b").unwrap().text, "t&u");
        assert!(node.child("c").is_some());
        assert!(parse_xml(b"<a><b></a>").is_err());
    }

    #[test]
    fn rich_text_items() {
        let si = parse_xml(b"<si><r><t>ab</t></r><r><t xml:space=\"preserve\"> c</t></r><rPh><t>x</t></rPh></si>").unwrap();
        assert_eq!(string_item(&si), "ab c");
    }
}
