use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use euc_core::changes::{ChangeEvent, EventState, ReviewDecision, Submission, Verdict};
use euc_core::ingest::load_workbook;
use euc_core::inventory::{
    validation_due, Category, ControlRequirementSet, EucRecord, NewRecord, PlanItemPatch, RecordPatch,
    RecordStatus, Summary, Tier, ValidationState,
};
use euc_core::standards::{audit, build_plan_with, AuditContext, AuditReport, AuditWarning, PlanItem, RemediationPlan};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{AppState, Problem};

pub const PRINCIPAL_HEADER: &str = "x-principal";
const MAX_UPLOAD: usize = 64 * 1024 * 1024;

type ApiResult<T> = Result<T, Problem>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/applications", get(list_applications).post(create_application))
        .route("/api/applications/{id}", get(get_application).patch(update_application))
        .route("/api/applications/{id}/audit", get(get_audit).post(run_audit))
        .route("/api/applications/{id}/plan", get(get_plan))
        .route("/api/applications/{id}/snapshots", post(submit_snapshot))
        .route("/api/plan-items/{id}", patch(update_plan_item))
        .route("/api/changes", get(list_changes))
        .route("/api/changes/{id}/decision", post(decide_change))
        .route("/api/summary", get(summary))
        .fallback(|| async { Problem::not_found("no such endpoint") })
        .layer(DefaultBodyLimit::max(MAX_UPLOAD))
        .with_state(state)
}

fn principal(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(PRINCIPAL_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .ok_or_else(|| {
            Problem::new("missing-principal", "the X-Principal header is required for changes")
                .with_field("X-Principal")
        })
}

fn parse_id(raw: &str) -> ApiResult<u64> {
    raw.parse()
        .map_err(|_| Problem::invalid("id", format!("{raw:?} is not a numeric id")))
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| Problem::new("validation-error", format!("request body: {e}")))
}

fn query_enum<T: DeserializeOwned>(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<T>> {
    q.get(key)
        .map(|v| {
            serde_json::from_value(serde_json::Value::String(v.trim().to_ascii_lowercase()))
                .map_err(|_| Problem::invalid(key, format!("unknown value {v:?}")))
        })
        .transpose()
}

/// A record plus everything derived from it.
#[derive(Debug, Serialize)]
pub struct ApplicationView {
    #[serde(flatten)]
    pub record: EucRecord,
    pub required_controls: ControlRequirementSet,
    pub validation_state: ValidationState,
    pub latest_compliance_score: Option<f64>,
}

fn view(state: &AppState, reg: &crate::Registry, record: &EucRecord) -> ApplicationView {
    ApplicationView {
        required_controls: record.required_controls(),
        validation_state: validation_due(record, state.now()),
        latest_compliance_score: reg.inventory.latest_audit(record.record_id).map(|a| a.compliance_score),
        record: record.clone(),
    }
}

async fn list_applications(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<ApplicationView>>> {
    let category: Option<Category> = query_enum(&q, "category")?;
    let tier: Option<Tier> = query_enum(&q, "tier")?;
    let status: Option<RecordStatus> = query_enum(&q, "status")?;
    let same = |want: Option<&String>, have: &str| want.is_none_or(|w| w.trim().eq_ignore_ascii_case(have));
    let reg = state.read();
    let out = reg
        .inventory
        .records()
        .filter(|r| category.is_none_or(|c| r.category == c))
        .filter(|r| tier.is_none_or(|t| r.tier == t))
        .filter(|r| status.is_none_or(|s| r.status == s))
        .filter(|r| same(q.get("owner"), &r.owner) && same(q.get("line_manager"), &r.line_manager))
        .map(|r| view(&state, &reg, r))
        .collect();
    Ok(Json(out))
}

async fn create_application(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<ApplicationView>)> {
    let who = principal(&headers)?;
    let new: NewRecord = json_body(&body)?;
    let mut reg = state.write();
    let rec = reg.inventory.register(&new, &who, state.now())?;
    tracing::info!(record_id = rec.record_id, principal = %who, "registered");
    Ok((StatusCode::CREATED, Json(view(&state, &reg, &rec))))
}

async fn get_application(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ApplicationView>> {
    let id = parse_id(&id)?;
    let reg = state.read();
    let rec = reg
        .inventory
        .get(id)
        .ok_or_else(|| Problem::not_found(format!("record {id} not found")))?;
    Ok(Json(view(&state, &reg, rec)))
}

async fn update_application(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<ApplicationView>> {
    let id = parse_id(&id)?;
    let who = principal(&headers)?;
    let patch: RecordPatch = json_body(&body)?;
    let mut reg = state.write();
    let rec = reg.inventory.update(id, &patch, &who, state.now())?;
    Ok(Json(view(&state, &reg, &rec)))
}

async fn get_audit(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<AuditReport>> {
    let id = parse_id(&id)?;
    let reg = state.read();
    reg.inventory.get(id).ok_or_else(|| Problem::not_found(format!("record {id} not found")))?;
    let report = reg
        .inventory
        .latest_audit(id)
        .ok_or_else(|| Problem::not_found(format!("record {id} has no audit yet")))?;
    Ok(Json(report.clone()))
}

#[derive(Debug, Serialize)]
pub struct AuditOutcome {
    pub report: AuditReport,
    pub plan: RemediationPlan,
}

fn base_name(key: &str) -> &str {
    key.rsplit(['/', '\\']).next().unwrap_or(key)
}

/// The body is the workbook itself: canonical JSON or a spreadsheet
/// container. `?file_name=` also runs the archive naming rule.
async fn run_audit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<AuditOutcome>)> {
    let id = parse_id(&id)?;
    let who = principal(&headers)?;
    let (name, owner) = {
        let reg = state.read();
        let rec = reg
            .inventory
            .get(id)
            .ok_or_else(|| Problem::not_found(format!("record {id} not found")))?;
        (rec.file_key.as_deref().map_or(rec.name.clone(), |k| base_name(k).to_string()), rec.owner.clone())
    };
    if body.is_empty() {
        return Err(Problem::invalid("body", "upload the workbook as the request body"));
    }
    let ingested = load_workbook(&body, &name)?;
    let settings = state.settings();
    let mut ctx = AuditContext::at(state.now());
    if let Some(f) = q.get("file_name").filter(|f| !f.trim().is_empty()) {
        ctx = ctx.with_file_name(f.trim());
    }
    let mut report = audit(&ingested.workbook, &settings.rules, &ctx);
    report.warnings.extend(ingested.warnings.into_iter().map(|w| AuditWarning {
        location: w.location,
        message: format!("{}: {}", w.code, w.message),
    }));
    let plan = build_plan_with(&report, &settings.effort, &settings.rules, &owner);
    let mut reg = state.write();
    let plan = reg.inventory.store_audit(id, report.clone(), plan)?;
    tracing::info!(record_id = id, principal = %who, findings = report.findings.len(), "audit stored");
    Ok((StatusCode::CREATED, Json(AuditOutcome { report, plan })))
}

async fn get_plan(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RemediationPlan>> {
    let id = parse_id(&id)?;
    let reg = state.read();
    reg.inventory.get(id).ok_or_else(|| Problem::not_found(format!("record {id} not found")))?;
    let plan = reg
        .inventory
        .plan(id)
        .ok_or_else(|| Problem::not_found(format!("record {id} has no plan yet")))?;
    Ok(Json(plan.clone()))
}

async fn update_plan_item(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<PlanItem>> {
    let id = parse_id(&id)?;
    let who = principal(&headers)?;
    let patch: PlanItemPatch = json_body(&body)?;
    let mut reg = state.write();
    let item = reg.inventory.update_plan_item(id, &patch)?;
    tracing::info!(item_id = id, principal = %who, status = item.status.as_str(), "plan item updated");
    Ok(Json(item))
}

/// Records a new version of the record's linked file and diffs it against
/// the controlled baseline.
async fn submit_snapshot(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Submission>)> {
    let id = parse_id(&id)?;
    let who = principal(&headers)?;
    let key = {
        let reg = state.read();
        let rec = reg
            .inventory
            .get(id)
            .ok_or_else(|| Problem::not_found(format!("record {id} not found")))?;
        if !rec.is_active() {
            return Err(Problem::new("record-immutable", format!("record is {}", rec.status)));
        }
        rec.file_key
            .clone()
            .ok_or_else(|| Problem::invalid("file_key", "the record has no linked file"))?
    };
    if body.is_empty() {
        return Err(Problem::invalid("body", "upload the workbook as the request body"));
    }
    let ingested = load_workbook(&body, base_name(&key))?;
    let mut reg = state.write();
    let sub = reg
        .changes
        .submit(&key, &ingested.workbook, &who, state.now(), &state.settings().alerts)?;
    if let Some(event) = sub.event.as_ref().filter(|e| e.state == EventState::PendingReview) {
        notify_pending(event);
    }
    Ok((StatusCode::CREATED, Json(sub)))
}

// The outbound notification hook: logged, never delivered.
fn notify_pending(event: &ChangeEvent) {
    tracing::info!(
        target: "euc_server::notify",
        event_id = event.event_id,
        file_key = %event.file_key,
        triggers = ?event.triggered_rules,
        "change awaiting review"
    );
}

async fn list_changes(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<ChangeEvent>>> {
    let wanted = q
        .get("state")
        .map(|s| s.parse::<EventState>().map_err(|_| Problem::invalid("state", format!("unknown state {s:?}"))))
        .transpose()?;
    let reg = state.read();
    let out = reg
        .changes
        .events(wanted)
        .into_iter()
        .filter(|e| q.get("file_key").is_none_or(|k| *k == e.file_key))
        .cloned()
        .collect();
    Ok(Json(out))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    verdict: Verdict,
    #[serde(default)]
    comment: String,
    #[serde(default)]
    rebaseline: Option<bool>,
}

/// The reviewer is the calling principal.
async fn decide_change(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<ChangeEvent>> {
    let id = parse_id(&id)?;
    let who = principal(&headers)?;
    let body: DecisionBody = json_body(&body)?;
    let decision = ReviewDecision {
        reviewer: who,
        decided_at: state.now(),
        verdict: body.verdict,
        comment: body.comment.trim().to_string(),
    };
    let mut reg = state.write();
    let event = reg.changes.decide(id, decision, body.rebaseline.unwrap_or(true))?;
    Ok(Json(event))
}

async fn summary(State(state): State<AppState>) -> Json<Summary> {
    Json(state.read().inventory.summary(state.now()))
}
