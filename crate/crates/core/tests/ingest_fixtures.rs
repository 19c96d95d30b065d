use std::path::PathBuf;

use euc_core::ingest::{import_xlsx, import_xlsx_named, load_workbook, sniff_format, FileKind};
use euc_core::workbook::{parse_canonical, serialize_canonical, CellValue, SourceFormat};

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/xlsx").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn expected(stem: &str) -> euc_core::Workbook {
    let text = String::from_utf8(fixture(&format!("{stem}.expected.json"))).unwrap();
    parse_canonical(&text).unwrap()
}

#[test]
fn hello_shared_string() {
    let report = import_xlsx_named(&fixture("hello.xlsx"), "hello").unwrap();
    assert_eq!(report.workbook, expected("hello"));
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    let cell = report.workbook.sheets[0].get("A1".parse().unwrap()).unwrap();
    assert_eq!(cell.value, CellValue::Text("hello".into()));
}

#[test]
fn formula_with_cached_value() {
    let report = import_xlsx_named(&fixture("formula.xlsx"), "formula").unwrap();
    assert_eq!(report.workbook, expected("formula"));
    let cell = report.workbook.sheets[0].get("B2".parse().unwrap()).unwrap();
    assert_eq!(cell.formula.as_deref(), Some("A1*2"));
    assert_eq!(cell.value, CellValue::Number(10.0));
}

#[test]
fn features_import_and_warn() {
    let report = import_xlsx_named(&fixture("features.xlsx"), "features").unwrap();
    assert_eq!(report.workbook, expected("features"));
    let mut codes: Vec<(String, String)> = report
        .warnings
        .iter()
        .map(|w| (w.code.clone(), w.message.clone()))
        .collect();
    codes.sort();
    let want = [
        ("comments", "part not imported"),
        ("drawing", "part not imported"),
        ("unsupported-element", "<dataValidations> not imported"),
        ("unsupported-element", "<legacyDrawing> not imported"),
        ("unsupported-element", "<mergeCells> not imported"),
    ];
    let want: Vec<(String, String)> = want.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    assert_eq!(codes, want);
}

#[test]
fn import_is_deterministic() {
    for (file, stem) in [("hello.xlsx", "hello"), ("formula.xlsx", "formula"), ("features.xlsx", "features")] {
        let bytes = fixture(file);
        let a = serialize_canonical(&import_xlsx_named(&bytes, stem).unwrap().workbook);
        let b = serialize_canonical(&import_xlsx_named(&bytes, stem).unwrap().workbook);
        assert_eq!(a, b);
        assert_eq!(parse_canonical(&a).unwrap(), expected(stem));
    }
}

#[test]
fn cfb_fixture_is_encrypted_opaque() {
    let bytes = fixture("encrypted.xlsx");
    assert_eq!(sniff_format(&bytes), FileKind::CfbEncrypted);
    let report = import_xlsx(&bytes).unwrap();
    assert_eq!(report.workbook.source_format, SourceFormat::EncryptedOpaque);
    assert!(report.workbook.security.encrypted);
    assert!(report.workbook.sheets.is_empty());
    assert_eq!(report.warnings[0].code, "encrypted-container");
}

#[test]
fn load_dispatches_on_content() {
    let json = fixture("hello.expected.json");
    assert_eq!(load_workbook(&json, "ignored").unwrap().workbook, expected("hello"));
    let xlsx = load_workbook(&fixture("hello.xlsx"), "hello").unwrap();
    assert_eq!(xlsx.workbook, expected("hello"));
    assert_eq!(load_workbook(b"plain text", "x").unwrap_err().code(), "not-a-spreadsheet");
}

#[test]
fn truncated_container_is_corrupt() {
    let bytes = fixture("features.xlsx");
    let cut = &bytes[..bytes.len() / 2];
    let err = import_xlsx(cut).unwrap_err();
    assert_eq!(err.code(), "corrupt-zip", "{err}");
}
