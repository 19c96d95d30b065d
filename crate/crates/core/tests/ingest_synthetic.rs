use std::io::{Cursor, Write};

use euc_core::ingest::import_xlsx;
use euc_core::workbook::CellValue;
use proptest::prelude::*;
use zip::write::SimpleFileOptions;
use zip::ZipWriter;

const WORKBOOK: &str = r#"<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships"><sheets><sheet name="S" sheetId="1" r:id="rId1"/></sheets></workbook>"#;
const RELS: &str = r#"<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships"><Relationship Id="rId1" Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" Target="worksheets/sheet1.xml"/></Relationships>"#;
const STRINGS: &str = r#"<sst><si><t>only</t></si></sst>"#;

fn container(parts: &[(&str, &str)]) -> Vec<u8> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, body) in parts {
        zip.start_file(*name, SimpleFileOptions::default()).unwrap();
        zip.write_all(body.as_bytes()).unwrap();
    }
    zip.finish().unwrap().into_inner()
}

fn sheet_xml(cells: &str) -> String {
    format!(r#"<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main"><sheetData>{cells}</sheetData></worksheet>"#)
}

fn book(sheet: &str) -> Vec<u8> {
    container(&[
        ("xl/workbook.xml", WORKBOOK),
        ("xl/_rels/workbook.xml.rels", RELS),
        ("xl/sharedStrings.xml", STRINGS),
        ("xl/worksheets/sheet1.xml", sheet),
    ])
}

#[test]
fn missing_workbook_part() {
    let bytes = container(&[("[Content_Types].xml", "<Types/>")]);
    assert_eq!(import_xlsx(&bytes).unwrap_err().code(), "missing-required-part");
}

#[test]
fn missing_worksheet_part() {
    let bytes = container(&[("xl/workbook.xml", WORKBOOK), ("xl/_rels/workbook.xml.rels", RELS)]);
    let err = import_xlsx(&bytes).unwrap_err();
    assert_eq!(err.code(), "missing-required-part");
    assert!(err.to_string().contains("xl/worksheets/sheet1.xml"));
}

#[test]
fn malformed_part() {
    let bytes = book("<worksheet><sheetData></worksheet>");
    assert_eq!(import_xlsx(&bytes).unwrap_err().code(), "malformed-part");
}

#[test]
fn shared_string_out_of_range_is_blank_with_warning() {
    let bytes = book(&sheet_xml(r#"<row r="1"><c r="A1" t="s"><v>7</v></c><c r="B1" t="s"><v>0</v></c></row>"#));
    let report = import_xlsx(&bytes).unwrap();
    let sheet = &report.workbook.sheets[0];
    assert!(sheet.get("A1".parse().unwrap()).is_none());
    assert_eq!(sheet.get("B1".parse().unwrap()).unwrap().value, CellValue::Text("only".into()));
    assert_eq!(report.warnings.len(), 1);
    assert_eq!(report.warnings[0].code, "shared-string-index");
    assert_eq!(report.warnings[0].location, "S!A1");
}

#[test]
fn cells_without_references_follow_position() {
    let bytes = book(&sheet_xml(r#"<row><c><v>1</v></c><c><v>2</v></c></row><row><c r="C2"><v>3</v></c><c><v>4</v></c></row>"#));
    let sheet = &import_xlsx(&bytes).unwrap().workbook.sheets[0];
    let got: Vec<String> = sheet.cells.keys().map(|a| a.to_string()).collect();
    assert_eq!(got, ["A1", "B1", "C2", "D2"]);
}

#[test]
fn missing_relationships_fall_back_to_position() {
    let bytes = container(&[
        ("xl/workbook.xml", WORKBOOK),
        ("xl/worksheets/sheet1.xml", &sheet_xml(r#"<row r="1"><c r="A1"><v>1</v></c></row>"#)),
    ]);
    let report = import_xlsx(&bytes).unwrap();
    assert_eq!(report.workbook.cell_count(), 1);
    assert_eq!(report.warnings[0].code, "missing-relationship");
}

#[test]
fn unknown_error_code_and_builtin_name() {
    let wb = WORKBOOK.replace(
        "</sheets>",
        r#"</sheets><definedNames><definedName name="_xlnm.Print_Area" localSheetId="0">S!$A$1:$B$2</definedName><definedName name="K">42</definedName></definedNames>"#,
    );
    let bytes = container(&[
        ("xl/workbook.xml", &wb),
        ("xl/_rels/workbook.xml.rels", RELS),
        ("xl/worksheets/sheet1.xml", &sheet_xml(r#"<row r="1"><c r="A1" t="e"><v>#SPILL!</v></c></row>"#)),
    ]);
    let report = import_xlsx(&bytes).unwrap();
    let codes: Vec<&str> = report.warnings.iter().map(|w| w.code.as_str()).collect();
    assert_eq!(codes, ["unsupported-error-code", "builtin-name", "unsupported-defined-name"]);
    assert!(report.workbook.named_ranges.is_empty());
}

#[test]
fn shared_formula_that_cannot_shift_is_reported() {
    let cells = r#"<row r="1"><c r="B1"><f t="shared" ref="B1:B3" si="0">SUM(</f></c></row><row r="2"><c r="B2"><f t="shared" si="0"/><v>1</v></c></row><row r="3"><c r="B3"><f t="shared" si="9"/><v>1</v></c></row>"#;
    let report = import_xlsx(&book(&sheet_xml(cells))).unwrap();
    let shared = report.warnings.iter().filter(|w| w.code == "shared-formula").count();
    assert_eq!(shared, 2);
    assert_eq!(report.workbook.sheets[0].get("B1".parse().unwrap()).unwrap().formula.as_deref(), Some("SUM("));
}

fn cell_xml() -> impl Strategy<Value = String> {
    let col = prop::sample::select(vec!["A", "B", "C", "ZZ", "XFD", "XFE", "1A", ""]);
    let kind = prop::sample::select(vec!["", " t=\"s\"", " t=\"b\"", " t=\"e\"", " t=\"str\"", " t=\"inlineStr\"", " t=\"d\"", " t=\"zz\""]);
    let value = prop::sample::select(vec!["", "<v>0</v>", "<v>-3</v>", "<v>99</v>", "<v>x</v>", "<v>NaN</v>", "<v>#N/A</v>", "<is><t>i</t></is>"]);
    let formula = prop::sample::select(vec![
        "",
        "<f>A1+1</f>",
        "<f>SUM(</f>",
        "<f t=\"shared\" si=\"1\"/>",
        "<f t=\"shared\" ref=\"A1:A3\" si=\"1\">A1*2</f>",
        "<f t=\"array\" ref=\"A1\">{1,2}</f>",
        "<f t=\"dataTable\"/>",
    ]);
    let style = prop::sample::select(vec!["", " s=\"0\"", " s=\"5\"", " s=\"x\""]);
    (col, 1u32..5, kind, value, formula, style).prop_map(|(c, r, k, v, f, s)| {
        let reference = if c.is_empty() { String::new() } else { format!(" r=\"{c}{r}\"") };
        format!("<c{reference}{k}{s}>{f}{v}</c>")
    })
}

fn extra_xml() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "",
        "<mergeCells><mergeCell ref=\"A1:B1\"/></mergeCells>",
        "<hyperlinks/>",
        "<conditionalFormatting sqref=\"A1\"/>",
        "<sheetProtection sheet=\"0\"/>",
        "<cols><col min=\"4\" max=\"2\" hidden=\"1\"/></cols>",
        "<futureThing><x/></futureThing>",
    ])
    .prop_map(str::to_string)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn well_formed_content_never_fails(
        rows in prop::collection::vec((prop::option::of(0u32..6), any::<bool>(), prop::collection::vec(cell_xml(), 0..5)), 0..5),
        extras in prop::collection::vec(extra_xml(), 0..3),
    ) {
        let body: String = rows
            .iter()
            .map(|(r, hidden, cells)| {
                let r = r.map(|r| format!(" r=\"{r}\"")).unwrap_or_default();
                let h = if *hidden { " hidden=\"1\"" } else { "" };
                format!("<row{r}{h}>{}</row>", cells.concat())
            })
            .collect();
        let xml = format!(
            r#"<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main"><sheetData>{body}</sheetData>{}</worksheet>"#,
            extras.concat()
        );
        let report = import_xlsx(&book(&xml));
        prop_assert!(report.is_ok(), "{:?}", report.err());
        let report = report.unwrap();
        report.workbook.validate().unwrap();
        let skipped = extras.iter().filter(|e| !e.is_empty() && !e.starts_with("<sheetProtection")).count();
        prop_assert!(report.warnings.len() >= skipped);
    }
}
