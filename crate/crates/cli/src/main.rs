//! `eucctl`: audit, diff and plan single files, record snapshots, and seed
//! or serve the inventory.
//!
//! Exit codes: 0 success, 1 operational error, 2 findings at or above
//! `--fail-on`, 3 diff found changes, 4 diff found changes that triggered
//! alert rules.

mod output;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use euc_core::changes::{diff, apply_alert_rules, AlertRuleSet, ChangeStore};
use euc_core::ingest::load_workbook;
use euc_core::integrity::Severity;
use euc_core::inventory::demo::demo_records;
use euc_core::inventory::{Category, InventoryStore};
use euc_core::standards::{audit, build_plan, AuditContext, AuditReport, EffortConfig, RuleConfig, SCHEMA_VERSION};
use euc_core::timefmt;
use euc_core::workbook::Workbook;
use euc_server::{AppState, DataDirLock, Registry, Settings};
use serde_json::json;

const EXIT_FINDINGS: u8 = 2;
const EXIT_CHANGES: u8 = 3;
const EXIT_TRIGGERED: u8 = 4;

#[derive(Parser)]
#[command(name = "eucctl", version, about = "Spreadsheet control toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Threshold {
    High,
    Medium,
    Low,
}

impl Threshold {
    fn severity(self) -> Severity {
        match self {
            Threshold::High => Severity::High,
            Threshold::Medium => Severity::Medium,
            Threshold::Low => Severity::Low,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Audit a canonical JSON workbook or a spreadsheet file.
    Audit {
        file: PathBuf,
        /// Rule configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, value_enum, default_value = "high")]
        fail_on: Threshold,
        /// Where the file lives, for the restricted-location rule.
        #[arg(long)]
        location: Option<String>,
        /// Also check the file's own name against the archive convention.
        #[arg(long)]
        archive_name: bool,
    },
    /// Compare two versions of a workbook.
    Diff {
        old: PathBuf,
        new: PathBuf,
        /// Alert rule set (JSON). Without it no triggers are evaluated.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Build a remediation plan from an audit report (JSON).
    Plan {
        report: PathBuf,
        /// Per-severity effort weights (JSON).
        #[arg(long)]
        effort: Option<PathBuf>,
    },
    /// Record a new version of a monitored file in the change store.
    Snapshot {
        file: PathBuf,
        #[arg(long)]
        file_key: String,
        #[arg(long)]
        author: String,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, env = "EUCCTL_DATA_DIR")]
        data_dir: PathBuf,
    },
    /// Load the demo registry (700 financial, 200 operational).
    SeedDemo {
        #[arg(long, env = "EUCCTL_DATA_DIR")]
        data_dir: PathBuf,
    },
    /// Run the HTTP service until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
        #[arg(long, env = "EUCCTL_DATA_DIR")]
        data_dir: PathBuf,
        /// Rule configuration used for uploaded audits.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Alert rule set used for submitted snapshots.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

struct Failure {
    code: &'static str,
    message: String,
}

fn fail(code: &'static str, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("eucctl: {}: {}", f.code, f.message);
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Audit {
            file,
            config,
            format,
            fail_on,
            location,
            archive_name,
        } => cmd_audit(&file, config.as_deref(), format, fail_on, location, archive_name),
        Command::Diff { old, new, rules, format } => cmd_diff(&old, &new, rules.as_deref(), format),
        Command::Plan { report, effort } => cmd_plan(&report, effort.as_deref()),
        Command::Snapshot {
            file,
            file_key,
            author,
            rules,
            data_dir,
        } => cmd_snapshot(&file, &file_key, &author, rules.as_deref(), &data_dir),
        Command::SeedDemo { data_dir } => cmd_seed(&data_dir),
        Command::Serve {
            port,
            bind,
            data_dir,
            config,
            rules,
        } => cmd_serve(SocketAddr::new(bind, port), &data_dir, config.as_deref(), rules.as_deref()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| fail("unreadable-file", format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| fail("unreadable-file", format!("{}: not UTF-8", path.display())))
}

fn load(path: &Path) -> Result<Workbook, Failure> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("workbook");
    let ingested =
        load_workbook(&read(path)?, name).map_err(|e| fail(e.code(), format!("{}: {e}", path.display())))?;
    for w in &ingested.warnings {
        eprintln!("warning: {} {}: {}", w.code, w.location, w.message);
    }
    Ok(ingested.workbook)
}

fn rule_config(path: Option<&Path>) -> Result<RuleConfig, Failure> {
    match path {
        None => Ok(RuleConfig::default()),
        Some(p) => RuleConfig::from_json(&read_text(p)?).map_err(|e| fail("bad-config", format!("{}: {e}", p.display()))),
    }
}

fn alert_rules(path: Option<&Path>, default: AlertRuleSet) -> Result<AlertRuleSet, Failure> {
    match path {
        None => Ok(default),
        Some(p) => AlertRuleSet::from_json(&read_text(p)?).map_err(|e| fail("bad-config", format!("{}: {e}", p.display()))),
    }
}

// A closed pipe (`| head`) is not an error worth a panic.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn print_json(value: &impl serde::Serialize) {
    emit(&(serde_json::to_string_pretty(value).expect("serializable") + "\n"));
}

fn cmd_audit(
    file: &Path,
    config: Option<&Path>,
    format: Format,
    fail_on: Threshold,
    location: Option<String>,
    archive_name: bool,
) -> CmdResult {
    let cfg = rule_config(config)?;
    let wb = load(file)?;
    let mut ctx = AuditContext::at(timefmt::now());
    if let Some(name) = file.file_name().and_then(|n| n.to_str()).filter(|_| archive_name) {
        ctx = ctx.with_file_name(name);
    }
    if let Some(loc) = location {
        ctx = ctx.with_location(loc);
    }
    let report = audit(&wb, &cfg, &ctx);
    match format {
        Format::Json => print_json(&report),
        Format::Text => emit(&output::audit_text(&report)),
    }
    Ok(if report.count_at_or_above(fail_on.severity()) > 0 { EXIT_FINDINGS } else { 0 })
}

fn cmd_diff(old: &Path, new: &Path, rules: Option<&Path>, format: Format) -> CmdResult {
    let rules = alert_rules(rules, AlertRuleSet::none())?;
    let a = load(old)?;
    let b = load(new)?;
    let d = diff(&a, &b);
    let triggered = apply_alert_rules(&d, &a, &rules);
    match format {
        Format::Json => print_json(&json!({
            "schema_version": SCHEMA_VERSION,
            "old": old.display().to_string(),
            "new": new.display().to_string(),
            "diff": d,
            "triggered_rules": triggered,
        })),
        Format::Text => emit(&output::diff_text(&d, &triggered)),
    }
    Ok(match (d.is_empty(), triggered.is_empty()) {
        (true, _) => 0,
        (false, true) => EXIT_CHANGES,
        (false, false) => EXIT_TRIGGERED,
    })
}

fn cmd_plan(report: &Path, effort: Option<&Path>) -> CmdResult {
    let report = AuditReport::from_json(&read_text(report)?)
        .map_err(|e| fail("bad-report", format!("{}: {e}", report.display())))?;
    let effort = match effort {
        None => EffortConfig::default(),
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| fail("bad-config", format!("{}: {e}", p.display())))?,
    };
    print_json(&build_plan(&report, &effort));
    Ok(0)
}

fn lock(data_dir: &Path) -> Result<DataDirLock, Failure> {
    DataDirLock::acquire(data_dir).map_err(|e| fail(e.code(), e.to_string()))
}

fn cmd_snapshot(file: &Path, key: &str, author: &str, rules: Option<&Path>, data_dir: &Path) -> CmdResult {
    let rules = alert_rules(rules, AlertRuleSet::default())?;
    let wb = load(file)?;
    let _lock = lock(data_dir)?;
    let mut store = ChangeStore::open(&data_dir.join("changes")).map_err(|e| fail(e.code(), e.to_string()))?;
    let sub = store
        .submit(key, &wb, author, timefmt::now(), &rules)
        .map_err(|e| fail(e.code(), e.to_string()))?;
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "snapshot": sub.snapshot,
        "event": sub.event,
    }));
    Ok(0)
}

fn cmd_seed(data_dir: &Path) -> CmdResult {
    let _lock = lock(data_dir)?;
    let mut inv = InventoryStore::open(&data_dir.join("inventory")).map_err(|e| fail(e.code(), e.to_string()))?;
    if !inv.is_empty() {
        return Err(fail(
            "registry-not-empty",
            format!("{} already holds {} records", data_dir.display(), inv.len()),
        ));
    }
    let now = timefmt::now();
    let recs = inv
        .register_batch(&demo_records(now), "seed-demo", now)
        .map_err(|e| fail(e.code(), e.to_string()))?;
    let count = |c: Category| recs.iter().filter(|r| r.category == c).count();
    print_json(&json!({
        "schema_version": SCHEMA_VERSION,
        "registered": recs.len(),
        "financial": count(Category::Financial),
        "operational": count(Category::Operational),
    }));
    Ok(0)
}

fn cmd_serve(addr: SocketAddr, data_dir: &Path, config: Option<&Path>, rules: Option<&Path>) -> CmdResult {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let settings = Settings {
        rules: rule_config(config)?,
        alerts: alert_rules(rules, AlertRuleSet::default())?,
        effort: EffortConfig::default(),
    };
    let _lock = lock(data_dir)?;
    let registry = Registry::open(data_dir).map_err(|e| fail("storage-failure", e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| fail("runtime", e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                fail("port-in-use", format!("{addr} is already in use"))
            } else {
                fail("bind-failed", format!("{addr}: {e}"))
            }
        })?;
        let local = listener.local_addr().map_err(|e| fail("bind-failed", e.to_string()))?;
        emit(&format!("listening on http://{local}\n"));
        euc_server::serve(listener, AppState::new(registry, settings), shutdown_signal())
            .await
            .map_err(|e| fail("serve-failed", e.to_string()))
    })?;
    Ok(0)
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("signal handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}
