use std::fmt::Write;

use euc_core::changes::WorkbookDiff;
use euc_core::standards::AuditReport;
use euc_core::workbook::Cell;

pub fn audit_text(r: &AuditReport) -> String {
    let mut out = String::new();
    let (passed, applicable) = r.score_fraction();
    let _ = writeln!(out, "workbook: {}", r.workbook_name);
    let _ = writeln!(
        out,
        "compliance: {:.3} ({passed}/{applicable} rules passed, {} not applicable)",
        r.compliance_score,
        r.rules_not_applicable.len()
    );
    for f in &r.findings {
        let _ = writeln!(out, "{:<6} {:<10} {}: {}", f.severity.as_str(), f.rule_id, f.location(), f.message);
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning {}: {}", w.location, w.message);
    }
    out
}

fn cell_text(c: Option<&Cell>) -> String {
    match c {
        None => "-".to_string(),
        Some(c) => match &c.formula {
            Some(f) => format!("={f}"),
            None => c.value.to_string(),
        },
    }
}

pub fn diff_text(d: &WorkbookDiff, triggered: &[String]) -> String {
    let mut out = String::new();
    if d.is_empty() {
        out.push_str("no changes\n");
        return out;
    }
    for s in &d.sheet_changes {
        let _ = writeln!(out, "sheet {}: {:?}", s.sheet, s.kind);
    }
    for c in &d.changes {
        let _ = writeln!(
            out,
            "{}!{} {}: {} -> {}",
            c.sheet,
            c.addr,
            c.kind.as_str(),
            cell_text(c.before.as_ref()),
            cell_text(c.after.as_ref())
        );
    }
    for n in &d.named_range_changes {
        let _ = writeln!(out, "named range {}", n.name);
    }
    if d.security_change.is_some() {
        out.push_str("security settings changed\n");
    }
    let _ = writeln!(out, "{} cell changes, structural: {}", d.changes.len(), d.structural);
    if !triggered.is_empty() {
        let _ = writeln!(out, "triggered: {}", triggered.join(", "));
    }
    out
}
