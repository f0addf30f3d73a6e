use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ptwin_core::sandbox::{tornado_table, Scenario};
use ptwin_core::twin::{
    evm_as_of, run_ablation, Component, ProjectStore, RunOptions, SourceKind, Twin, TwinError, TwinState,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::ApiError;

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

/// A twin plus the directory it persists to, if any.
pub struct Project {
    pub twin: Twin,
    pub store: Option<ProjectStore>,
}

/// Shared service state. Writers hold the lock for the whole mutation;
/// readers copy what they need and release it.
#[derive(Clone)]
pub struct AppState {
    project: Arc<Mutex<Project>>,
    defaults: RunOptions,
}

impl AppState {
    pub fn new(twin: Twin, store: Option<ProjectStore>, defaults: RunOptions) -> Self {
        Self {
            project: Arc::new(Mutex::new(Project { twin, store })),
            defaults,
        }
    }

    async fn snapshot(&self) -> TwinState {
        self.project.lock().await.twin.state().clone()
    }

    async fn twin(&self) -> Twin {
        self.project.lock().await.twin.clone()
    }

    /// Applies `f` to a copy, persists it, then publishes it.
    async fn mutate<T, F>(&self, expected: Option<u64>, f: F) -> Result<(u64, T), ApiError>
    where
        F: FnOnce(&mut Twin) -> Result<T, TwinError> + Send + 'static,
        T: Send + 'static,
    {
        let mut project = self.project.lock().await;
        if let Some(v) = expected {
            project.twin.check_version(v)?;
        }
        let mut next = project.twin.clone();
        let store = project.store.clone();
        let (next, out) = tokio::task::spawn_blocking(move || -> Result<(Twin, T), TwinError> {
            let out = f(&mut next)?;
            if let Some(s) = &store {
                s.save(&next)?;
            }
            Ok((next, out))
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
        let version = next.version();
        project.twin = next;
        Ok((version, out))
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, TwinError> + Send + 'static,
    T: Send + 'static,
{
    Ok(tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/project", get(project))
        .route("/forecast", get(forecast))
        .route("/evm", get(evm))
        .route("/buffers", get(buffers))
        .route("/criticality", get(criticality))
        .route("/recommendations", get(recommendations))
        .route("/recommendations/{id}/decision", post(decision))
        .route("/ingest/{kind}", post(ingest))
        .route("/week/{n}/run", post(run_week))
        .route("/scenarios/evaluate", post(evaluate))
        .route("/tornado", get(tornado))
        .route("/hypotheses", get(hypotheses))
        .route("/ablation", get(ablation))
        .with_state(state)
}

async fn project(State(app): State<AppState>) -> ApiResult {
    Ok(Json(json!(app.snapshot().await.summary())))
}

#[derive(Serialize)]
struct WeekPoint {
    week: u32,
    p50_finish: f64,
    p80_finish: f64,
    mean_finish: f64,
    deterministic_finish: f64,
    missing_evidence: bool,
}

async fn forecast(State(app): State<AppState>) -> ApiResult {
    let state = app.snapshot().await;
    let opts = app.defaults;
    let weeks: Vec<WeekPoint> = state
        .weeks
        .values()
        .map(|w| WeekPoint {
            week: w.week,
            p50_finish: w.forecast.p50_finish,
            p80_finish: w.forecast.p80_finish,
            mean_finish: w.forecast.mean_finish,
            deterministic_finish: w.deterministic_finish,
            missing_evidence: w.missing_evidence,
        })
        .collect();
    let version = state.version;
    let actual = state.config.actual_finish;
    let current = match state.weeks.values().next_back() {
        Some(w) => w.forecast.clone(),
        None => blocking(move || state.forecast_now(opts)).await?,
    };
    Ok(Json(json!({
        "version": version,
        "weeks": weeks,
        "current": current,
        "actual_finish": actual,
    })))
}

async fn evm(State(app): State<AppState>) -> ApiResult {
    let state = app.snapshot().await;
    let through = state.config.weeks.max(state.last_week());
    Ok(Json(json!({
        "version": state.version,
        "report": evm_as_of(&state, through)?,
        "quantities": state.quantities,
    })))
}

async fn buffers(State(app): State<AppState>) -> ApiResult {
    let state = app.snapshot().await;
    Ok(Json(json!({
        "version": state.version,
        "baseline": state.config.buffers,
        "feeding_activity": state.config.feeding_activity,
        "state": state.buffer,
    })))
}

#[derive(Serialize)]
struct CriticalityRow {
    activity: String,
    name: String,
    criticality_pct: f64,
    p50_finish: Option<f64>,
}

async fn criticality(State(app): State<AppState>) -> ApiResult {
    let state = app.snapshot().await;
    let opts = app.defaults;
    let version = state.version;
    let week = state.weeks.values().next_back().map(|w| w.week);
    let (state, forecast) = match state.weeks.values().next_back() {
        Some(w) => {
            let f = w.forecast.clone();
            (state, f)
        }
        None => {
            blocking(move || {
                let f = state.forecast_now(opts)?;
                Ok((state, f))
            })
            .await?
        }
    };
    let network = state.network()?;
    let rows: Vec<CriticalityRow> = forecast
        .criticality_ranking()
        .into_iter()
        .map(|id| CriticalityRow {
            name: network.activity(&id).map(|a| a.name.clone()).unwrap_or_default(),
            criticality_pct: forecast.criticality[&id],
            p50_finish: forecast.activity_p50_finish.get(&id).copied(),
            activity: id,
        })
        .collect();
    Ok(Json(json!({ "version": version, "week": week, "activities": rows })))
}

#[derive(Deserialize)]
struct WeekFilter {
    week: Option<u32>,
}

async fn recommendations(State(app): State<AppState>, Query(q): Query<WeekFilter>) -> ApiResult {
    let state = app.snapshot().await;
    let recs: Vec<_> = state
        .recommendations
        .iter()
        .filter(|r| q.week.is_none_or(|w| r.week == w))
        .collect();
    let overtime = if state.lookaheads.is_empty() {
        None
    } else {
        Some(state.overtime()?)
    };
    Ok(Json(json!({
        "version": state.version,
        "recommendations": recs,
        "decisions": state.decision_log,
        "overtime": overtime,
    })))
}

#[derive(Deserialize)]
struct DecisionBody {
    version: u64,
    adopted: bool,
    #[serde(default)]
    reason: String,
    timestamp: Option<String>,
}

async fn decision(State(app): State<AppState>, Path(id): Path<String>, Json(body): Json<DecisionBody>) -> ApiResult {
    let timestamp = body
        .timestamp
        .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let (version, record) = app
        .mutate(Some(body.version), move |t| t.decide(&id, body.adopted, &body.reason, &timestamp))
        .await?;
    Ok(Json(json!({ "version": version, "decision": record })))
}

#[derive(Deserialize)]
struct VersionQuery {
    version: Option<u64>,
}

async fn ingest(
    State(app): State<AppState>,
    Path(kind): Path<String>,
    Query(q): Query<VersionQuery>,
    body: String,
) -> ApiResult {
    let kind: SourceKind = kind.parse()?;
    let (version, ()) = app
        .mutate(q.version, move |t| t.ingest(kind, &body).map(|_| ()))
        .await?;
    Ok(Json(json!({ "version": version, "kind": kind })))
}

#[derive(Deserialize)]
struct RunQuery {
    version: Option<u64>,
    seed: Option<u64>,
    samples: Option<usize>,
}

async fn run_week(State(app): State<AppState>, Path(n): Path<u32>, Query(q): Query<RunQuery>) -> ApiResult {
    let opts = RunOptions {
        seed: q.seed.or(app.defaults.seed),
        samples: q.samples.or(app.defaults.samples),
        threads: app.defaults.threads,
    };
    let (version, result) = app.mutate(q.version, move |t| t.run_week(n, opts)).await?;
    Ok(Json(json!({ "version": version, "result": result })))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioBody {
    Many { scenarios: Vec<Scenario> },
    One(Scenario),
}

async fn evaluate(State(app): State<AppState>, Json(body): Json<ScenarioBody>) -> ApiResult {
    let scenarios = match body {
        ScenarioBody::Many { scenarios } => scenarios,
        ScenarioBody::One(s) => vec![s],
    };
    if scenarios.is_empty() {
        return Err(ApiError::BadRequest("no scenarios given".into()));
    }
    let state = app.snapshot().await;
    let opts = app.defaults;
    let version = state.version;
    let (results, rows) = blocking(move || {
        let results = scenarios
            .iter()
            .map(|s| state.evaluate_scenario(s, opts))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = ptwin_core::sandbox::tornado(&results)?;
        Ok((results, rows))
    })
    .await?;
    Ok(Json(json!({ "version": version, "results": results, "tornado": rows })))
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn tornado(State(app): State<AppState>, Query(q): Query<FormatQuery>) -> Result<Response, ApiError> {
    let state = app.snapshot().await;
    let opts = app.defaults;
    let version = state.version;
    if state.scenarios.scenarios.is_empty() {
        return Err(TwinError::MissingInput("scenarios").into());
    }
    let rows = blocking(move || state.tornado(opts)).await?;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(json!({ "version": version, "rows": rows })).into_response()),
        Some("tsv") => Ok(([(header::CONTENT_TYPE, "text/tab-separated-values")], tornado_table(&rows)).into_response()),
        Some(other) => Err(ApiError::BadRequest(format!("unknown format {other}"))),
    }
}

async fn hypotheses(State(app): State<AppState>) -> ApiResult {
    let state = app.snapshot().await;
    Ok(Json(json!({
        "version": state.version,
        "inputs": state.hypothesis_inputs()?,
        "report": state.hypotheses()?,
    })))
}

#[derive(Deserialize)]
struct AblationQuery {
    /// Comma-separated components to remove.
    remove: Option<String>,
}

pub fn parse_components(list: &str) -> Result<BTreeSet<Component>, TwinError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

async fn ablation(State(app): State<AppState>, Query(q): Query<AblationQuery>) -> ApiResult {
    let sets: Vec<BTreeSet<Component>> = match q.remove.as_deref() {
        Some(list) => vec![parse_components(list)?],
        None => std::iter::once(BTreeSet::new())
            .chain(Component::ALL.iter().map(|c| BTreeSet::from([*c])))
            .collect(),
    };
    let twin = app.twin().await;
    let version = twin.version();
    let rows = blocking(move || sets.iter().map(|s| run_ablation(&twin, s)).collect::<Result<Vec<_>, _>>()).await?;
    Ok(Json(json!({ "version": version, "rows": rows })))
}
