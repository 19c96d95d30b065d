//! Acceptance suite: one PASS/FAIL line per primary criterion. Exits
//! non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use euc_core::changes::{apply_diff, diff, ChangeEvent, EventState, ReviewDecision, Verdict, WorkbookDiff};
use euc_core::formula::{normalize_r1c1, parse_formula, print_formula, shift_relative};
use euc_core::ingest::import_xlsx_named;
use euc_core::integrity::{check_inconsistent_formulas, Severity};
use euc_core::inventory::{required_controls, Category, Tier};
use euc_core::standards::{audit, build_plan, AuditContext, EffortConfig, RuleConfig};
use euc_core::timefmt::{self, Timestamp};
use euc_core::workbook::{parse_canonical, CellAddr, SourceFormat, Workbook};
use euc_testkit::ast_gen::{formula_ast, local_formula_ast};
use euc_testkit::grid::{inconsistency_oracle, planted_grid};
use euc_testkit::workbook_gen::random_pair;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use serde_json::{json, Value};

const ROUNDTRIP_CASES: usize = 500;
const ROUNDTRIP_BUDGET: Duration = Duration::from_secs(30);
const SHIFT_CASES: usize = 200;
const GRID_CASES: u64 = 100;
const PATCH_PAIRS: u64 = 100;
const EFFORT_DAYS: (f64, f64) = (3.0, 5.0);
const DEMO_BUDGET: Duration = Duration::from_secs(10);
const DEMO_COUNTS: (u64, u64) = (700, 200);

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn read_wb(path: &Path) -> Workbook {
    parse_canonical(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn at() -> Timestamp {
    timefmt::parse("2024-05-01T12:00:00Z").unwrap()
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn parser_round_trip() -> Check {
    let mut runner = TestRunner::deterministic();
    let strategy = formula_ast();
    let start = Instant::now();
    let mut failures = 0;
    for _ in 0..ROUNDTRIP_CASES {
        let ast = sample(&mut runner, &strategy);
        if parse_formula(&print_formula(&ast)).as_ref() != Ok(&ast) {
            failures += 1;
        }
    }
    let took = start.elapsed();
    ensure(failures == 0, || format!("{failures} of {ROUNDTRIP_CASES} ASTs did not round-trip"))?;
    ensure(took < ROUNDTRIP_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("{ROUNDTRIP_CASES} ASTs, 0 failures, {:.2}s", took.as_secs_f64()))
}

fn r1c1_shift_invariance() -> Check {
    let mut runner = TestRunner::deterministic();
    let asts = local_formula_ast(20);
    let hosts = ((1u32..=40, 1u32..=40), (1u32..=40, 1u32..=40));
    let (mut cases, mut attempts) = (0, 0);
    while cases < SHIFT_CASES {
        attempts += 1;
        ensure(attempts < SHIFT_CASES * 20, || format!("only {cases} shiftable cases generated"))?;
        let ast = sample(&mut runner, &asts);
        let ((r1, c1), (r2, c2)) = sample(&mut runner, &hosts);
        let (h1, h2) = (CellAddr { row: r1, col: c1 }, CellAddr { row: r2, col: c2 });
        let (dr, dc) = (i64::from(r2) - i64::from(r1), i64::from(c2) - i64::from(c1));
        // a shift pushing a reference off the sheet is not a valid case
        let Some(moved) = shift_relative(&ast, dr, dc) else { continue };
        ensure(normalize_r1c1(&moved, h2) == normalize_r1c1(&ast, h1), || {
            format!("{} at {h1} vs {} at {h2}", print_formula(&ast), print_formula(&moved))
        })?;
        cases += 1;
    }
    Ok(format!("{cases} cases, 0 failures"))
}

fn int01_oracle() -> Check {
    for seed in 0..GRID_CASES {
        let grid = planted_grid(seed, (seed % 4) as usize);
        let want = inconsistency_oracle(&grid).flagged;
        let got: BTreeSet<CellAddr> = check_inconsistent_formulas(&grid.workbook)
            .iter()
            .filter(|f| f.severity == Severity::High)
            .filter_map(|f| f.addr)
            .collect();
        ensure(got == want, || format!("seed {seed}: got {got:?}, oracle {want:?}"))?;
    }
    Ok(format!("{GRID_CASES} grids match the majority oracle"))
}

fn seeded_corpus() -> Check {
    let dir = fixtures().join("standards");
    let seeded: serde_json::Map<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("seeded.json")).unwrap()).unwrap();
    let cfg = RuleConfig::default();
    let ctx = AuditContext::at(at());
    let mut hits = 0;
    for (rule, file) in &seeded {
        let report = audit(&read_wb(&dir.join(file.as_str().unwrap())), &cfg, &ctx);
        let fired: BTreeSet<&str> = report.findings.iter().map(|f| f.rule_id.as_str()).collect();
        ensure(fired == BTreeSet::from([rule.as_str()]), || format!("{file}: fired {fired:?}, wanted {rule}"))?;
        hits += 1;
    }
    ensure(hits == 9, || format!("corpus has {hits} fixtures"))?;
    let golden = audit(&read_wb(&dir.join("remediated.wb.json")), &cfg, &ctx);
    ensure(golden.findings.is_empty() && golden.compliance_score == 1.0, || {
        format!("golden: score {}, {} findings", golden.compliance_score, golden.findings.len())
    })?;
    Ok(format!("{hits}/9 seeded rules fire alone, golden score 1.0"))
}

fn diff_properties() -> Check {
    let mut n = 0;
    for sub in ["standards", "xlsx"] {
        for entry in std::fs::read_dir(fixtures().join(sub)).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().to_string();
            if !name.ends_with(".json") || name == "seeded.json" {
                continue;
            }
            let wb = read_wb(&path);
            ensure(diff(&wb, &wb).is_empty(), || format!("{name}: self-diff not empty"))?;
            n += 1;
        }
    }
    for seed in 0..PATCH_PAIRS {
        let (a, b) = random_pair(seed);
        let d = diff(&a, &b);
        let replayed = apply_diff(&a, &d).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(replayed == b, || format!("seed {seed}: replay differs"))?;
    }
    Ok(format!("{n} fixtures self-diff empty, {PATCH_PAIRS} pairs replay exactly"))
}

fn event_in(state: EventState) -> ChangeEvent {
    let triggers = if state == EventState::AutoLogged { vec![] } else { vec!["structural_change".into()] };
    let mut e = ChangeEvent::detected(1, "f", (1, 2), WorkbookDiff::default(), "alice", at(), triggers);
    let verdict = match state {
        EventState::Approved => Some(Verdict::Approved),
        EventState::Rejected => Some(Verdict::Rejected),
        _ => None,
    };
    if let Some(verdict) = verdict {
        e.decide(ReviewDecision {
            reviewer: "bob".into(),
            decided_at: at(),
            verdict,
            comment: "checked".into(),
        })
        .unwrap();
    }
    e
}

fn state_machine() -> Check {
    let mut cases = 0;
    for state in EventState::ALL {
        for verdict in [Verdict::Approved, Verdict::Rejected] {
            for reviewer in ["alice", " Alice", "carol", ""] {
                for comment in ["", " ", "reconciled"] {
                    let mut e = event_in(state);
                    let before = e.clone();
                    let by_author = reviewer.trim().eq_ignore_ascii_case("alice");
                    let want: Result<EventState, &str> = if state != EventState::PendingReview {
                        Err("not-pending")
                    } else if reviewer.trim().is_empty() {
                        Err("missing-reviewer")
                    } else if by_author {
                        Err("self-review")
                    } else if verdict == Verdict::Rejected && comment.trim().is_empty() {
                        Err("missing-comment")
                    } else if verdict == Verdict::Rejected {
                        Ok(EventState::Rejected)
                    } else {
                        Ok(EventState::Approved)
                    };
                    let got = e
                        .decide(ReviewDecision {
                            reviewer: reviewer.into(),
                            decided_at: at(),
                            verdict,
                            comment: comment.into(),
                        })
                        .map(|_| e.state)
                        .map_err(|err| err.code());
                    let label = || format!("{state:?}/{verdict:?}/{reviewer:?}/{comment:?}");
                    ensure(got == want, || format!("{}: got {got:?}, want {want:?}", label()))?;
                    ensure(got.is_ok() || e == before, || format!("{}: failed decision mutated the event", label()))?;
                    ensure(e.invariants_hold(), || format!("{}: invariants broken", label()))?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} transitions enumerated, terminal states immutable"))
}

fn tier_table() -> Check {
    let rows = [
        (Tier::Critical, [true; 8], 8),
        (Tier::Significant, [true, true, true, true, true, false, true, true], 7),
        (Tier::Standard, [true, false, false, false, false, false, false, true], 2),
    ];
    for category in Category::ALL {
        for (tier, row, count) in rows {
            let set = required_controls(category, tier);
            let got = set.as_array().map(|(_, on)| on);
            ensure(got == row && set.count() == count, || format!("{category}/{tier}: {got:?}"))?;
        }
    }
    Ok("6/6 pairs; critical 8/8, significant 7/8, standard 2/8".into())
}

fn effort_calibration() -> Check {
    let report = audit(&read_wb(&fixtures().join("standards/mixed.wb.json")), &RuleConfig::default(), &AuditContext::at(at()));
    let days = build_plan(&report, &EffortConfig::default()).estimated_effort_days;
    ensure((EFFORT_DAYS.0..=EFFORT_DAYS.1).contains(&days), || format!("{days} days"))?;
    Ok(format!("{days} days for {} findings", report.findings.len()))
}

fn ingest() -> Check {
    let dir = fixtures().join("xlsx");
    let enc = import_xlsx_named(&std::fs::read(dir.join("encrypted.xlsx")).unwrap(), "encrypted")
        .map_err(|e| e.to_string())?;
    ensure(
        enc.workbook.source_format == SourceFormat::EncryptedOpaque && enc.workbook.security.encrypted,
        || "CFB fixture not reported as encrypted_opaque".into(),
    )?;
    for stem in ["hello", "formula", "features"] {
        let got = import_xlsx_named(&std::fs::read(dir.join(format!("{stem}.xlsx"))).unwrap(), stem)
            .map_err(|e| format!("{stem}: {e}"))?;
        let want = read_wb(&dir.join(format!("{stem}.expected.json")));
        ensure(got.workbook == want, || format!("{stem}: import differs from expected JSON"))?;
    }
    Ok("CFB fixture encrypted_opaque; 3 xlsx fixtures match expected JSON".into())
}

fn eucctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eucctl"))
}

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(data_dir: &Path) -> Result<Server, String> {
        let mut child = eucctl()
            .args(["serve", "--port", "0", "--data-dir"])
            .arg(data_dir)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?;
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .map_err(|e| e.to_string())?;
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .ok_or_else(|| format!("unexpected banner {line:?}"))?
            .to_string();
        Ok(Server { child, base })
    }

    fn get(&self, path: &str) -> Result<Value, String> {
        ureq::get(format!("{}{path}", self.base))
            .call()
            .map_err(|e| format!("GET {path}: {e}"))?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, String> {
        ureq::post(format!("{}{path}", self.base))
            .header("X-Principal", "acceptance")
            .send_json(body)
            .map_err(|e| format!("POST {path}: {e}"))?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())
    }

    /// SIGKILL: no shutdown path runs.
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn demo_seed() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = eucctl()
        .arg("seed-demo")
        .arg("--data-dir")
        .arg(dir.path())
        .stdout(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("seed-demo exited {status}"))?;
    let server = Server::start(dir.path())?;
    let summary = server.get("/api/summary")?;
    let took = start.elapsed();
    let counts = (
        summary["active_by_category"]["financial"].as_u64(),
        summary["active_by_category"]["operational"].as_u64(),
    );
    ensure(counts == (Some(DEMO_COUNTS.0), Some(DEMO_COUNTS.1)), || format!("summary counts {counts:?}"))?;
    ensure(took < DEMO_BUDGET, || format!("took {took:?}"))?;
    Ok(format!("700 financial / 200 operational active in {:.2}s", took.as_secs_f64()))
}

fn durability() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut registered = Vec::new();
    for round in 0..3 {
        let server = Server::start(dir.path())?;
        let rec = server.post(
            "/api/applications",
            &json!({"name": format!("Model {round}"), "owner": "A. Okafor", "category": "financial",
                    "tier": "critical", "file_key": format!("fin/m{round}.xlsx")}),
        )?;
        registered.push(rec);
        server.kill();
    }
    let server = Server::start(dir.path())?;
    for rec in &registered {
        let id = rec["record_id"].as_u64().ok_or("no record_id")?;
        let back = server.get(&format!("/api/applications/{id}"))?;
        ensure(back == *rec, || format!("record {id} after restart: {back} != {rec}"))?;
    }
    Ok(format!("{} records survive SIGKILL right after the 201 response", registered.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("parser round-trip", parser_round_trip),
        ("R1C1 shift-invariance", r1c1_shift_invariance),
        ("INT-01 oracle equivalence", int01_oracle),
        ("seeded-defect audit corpus", seeded_corpus),
        ("diff properties", diff_properties),
        ("change-event state machine", state_machine),
        ("tier table", tier_table),
        ("effort calibration", effort_calibration),
        ("demo seed", demo_seed),
        ("durability", durability),
        ("ingest", ingest),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
