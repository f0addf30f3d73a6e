use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use ptwin_core::twin::{RunOptions, Twin, TwinConfig};
use ptwin_service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/");
    std::fs::read_to_string(format!("{dir}{name}")).unwrap()
}

fn app() -> Router {
    let config: TwinConfig = serde_json::from_str(&fixture("project.json")).unwrap();
    let opts = RunOptions {
        samples: Some(1000),
        ..RunOptions::default()
    };
    router(AppState::new(Twin::new(config), None, opts))
}

async fn call(app: &Router, method: &str, uri: &str, body: Body) -> (StatusCode, Value, String) {
    let resp = app
        .clone()
        .oneshot(Request::builder().method(method).uri(uri).body(body).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let json = serde_json::from_str(&text).unwrap_or(Value::Null);
    (status, json, text)
}

async fn ingest(app: &Router, kind: &str, file: &str) -> u64 {
    let (status, body, _) = call(app, "POST", &format!("/ingest/{kind}"), Body::from(fixture(file))).await;
    assert_eq!(status, StatusCode::OK, "{kind}: {body}");
    body["version"].as_u64().unwrap()
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let resp = app
        .clone()
        .oneshot(
            Request::builder()
                .method("POST")
                .uri(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
        .await
        .unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn loaded() -> Router {
    let app = app();
    for (kind, file) in [
        ("network", "network.json"),
        ("priors", "priors.csv"),
        ("resources", "resources.json"),
        ("evm", "evm.csv"),
        ("quantities", "quantities.csv"),
        ("scenarios", "scenarios.json"),
        ("evidence", "evidence.csv"),
    ] {
        ingest(&app, kind, file).await;
    }
    app
}

#[tokio::test]
async fn fresh_project_forecast_uses_priors() {
    let app = app();
    ingest(&app, "network", "network.json").await;
    ingest(&app, "priors", "priors.csv").await;
    let (status, body, _) = call(&app, "GET", "/forecast", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["weeks"].as_array().unwrap().len(), 0);
    let p50 = body["current"]["p50_finish"].as_f64().unwrap();
    assert!(p50 > 100.0 && p50 < 140.0, "{p50}");
}

#[tokio::test]
async fn forecast_without_priors_is_a_precondition_failure() {
    let (status, body, _) = call(&app(), "GET", "/forecast", Body::empty()).await;
    assert_eq!(status, StatusCode::PRECONDITION_FAILED);
    assert_eq!(body["error"], "missing-input");
}

#[tokio::test]
async fn bad_row_names_row_and_column() {
    let app = app();
    let csv = "week,activity_id,percent_complete,elapsed_days,observation_sd\n2,A010,1.3,4,\n";
    let (status, body, _) = call(&app, "POST", "/ingest/evidence", Body::from(csv)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["row"], 1);
    assert_eq!(body["column"], "percent_complete");
    let (status, _, _) = call(&app, "POST", "/ingest/photos", Body::from("x")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn week_decision_and_stale_version() {
    let app = loaded().await;
    let (status, body, _) = call(&app, "POST", "/week/1/run", Body::empty()).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let version = body["version"].as_u64().unwrap();
    let id = body["result"]["recommendations"][0].as_str().unwrap().to_string();

    let (_, recs, _) = call(&app, "GET", "/recommendations", Body::empty()).await;
    assert_eq!(recs["recommendations"][0]["action_id"], id.as_str());

    let uri = format!("/recommendations/{id}/decision");
    let (status, body) = post_json(&app, &uri, json!({ "version": version - 1, "adopted": true })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "stale-version");
    assert_eq!(body["version"], version);

    let (status, body) = post_json(
        &app,
        &uri,
        json!({ "version": version, "adopted": true, "timestamp": "2025-01-15T16:00:00Z" }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], version + 1);
    assert_eq!(body["decision"]["status"], "adopted");

    let (status, body) = post_json(&app, &uri, json!({ "version": version + 1, "adopted": false })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "already-decided");

    let (status, _) = post_json(&app, "/recommendations/RL-999/decision", json!({ "version": version + 1, "adopted": true })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _, _) = call(&app, "POST", "/week/3/run", Body::empty()).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn read_endpoints_after_a_week() {
    let app = loaded().await;
    call(&app, "POST", "/week/1/run", Body::empty()).await;
    for path in ["/project", "/forecast", "/evm", "/buffers", "/criticality", "/recommendations"] {
        let (status, body, _) = call(&app, "GET", path, Body::empty()).await;
        assert_eq!(status, StatusCode::OK, "{path}: {body}");
        assert!(body["version"].is_u64() || body["version"].is_number(), "{path}");
    }
    let (_, crit, _) = call(&app, "GET", "/criticality", Body::empty()).await;
    assert_eq!(crit["activities"].as_array().unwrap().len(), 18);
    let (_, evm, _) = call(&app, "GET", "/evm", Body::empty()).await;
    assert_eq!(evm["quantities"].as_array().unwrap().len(), 5);
    let (status, _, _) = call(&app, "GET", "/hypotheses", Body::empty()).await;
    assert_eq!(status, StatusCode::PRECONDITION_FAILED);
}

#[tokio::test]
async fn scenarios_and_tornado() {
    let app = loaded().await;
    let (status, body) = post_json(
        &app,
        "/scenarios/evaluate",
        json!({ "name": "AHU late", "perturbations": [{ "type": "delivery-offset", "activity": "A120", "days": 10 }] }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["results"][0]["d_finish_p50"].as_f64().unwrap() > 0.0);

    let (status, _, tsv) = call(&app, "GET", "/tornado?format=tsv", Body::empty()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(tsv.starts_with("rank\tname"));
    assert_eq!(tsv.lines().count(), 8);
}

#[tokio::test]
async fn ablation_rejects_unknown_component() {
    let (status, body, _) = call(&loaded().await, "GET", "/ablation?remove=vision", Body::empty()).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"], "unknown-component");
}
