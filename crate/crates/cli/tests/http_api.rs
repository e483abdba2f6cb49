use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use loopgraft_cli::api::router;
use loopgraft_core::builder::layout_structure;
use loopgraft_core::orchestration::{Config, MemoryProvider, SessionManager};
use loopgraft_core::write_pdb;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let p = MemoryProvider::new();
    let s = layout_structure(
        "1SCF",
        'A',
        1,
        "CHHHHHHHHHHCCCCCEEEEEECCCCHHHHHHHHHHHCCCCCEEEEEEECCCHHHHHHHHHHC",
    );
    let i = layout_structure("2INS", 'A', 1, "CHHHHHHHHHHHCCCCCCCEEEEEECCCCHHHHHHHHHHCCCCEEEEEEEC");
    p.insert("1scf", write_pdb(&s)).unwrap();
    p.insert("2ins", write_pdb(&i)).unwrap();
    let config = Config {
        job_threads: 2,
        variant_window: 1,
        ..Config::from_lookup(|_| None)
    };
    router(SessionManager::new(Arc::new(p), config))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value, String) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8_lossy(&bytes).to_string();
    (status, serde_json::from_str(&text).unwrap_or(Value::Null), text)
}

async fn new_session(app: &Router) -> String {
    let (st, v, _) = call(
        app,
        "POST",
        "/sessions",
        Some(json!({"scaffold": "1scf:A", "insert": {"pdb_id": "2ins", "chain": "A"}})),
    )
    .await;
    assert_eq!(st, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn full_workflow() {
    let app = app();
    let id = new_session(&app).await;
    let (_, v, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "P1");

    let (st, v, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/phase"),
        Some(json!({"phase": "P5"})),
    )
    .await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"], "GateUnsatisfied");

    let (_, loops, _) = call(&app, "GET", &format!("/sessions/{id}/loops"), None).await;
    let lid = loops["scaffold"][0]["loop"]["id"].as_str().unwrap().to_string();
    assert_eq!(loops["scaffold"][0]["state"], "preserved");
    let (st, v, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/loops/{lid}/triage"),
        Some(json!({"state": "candidate"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["scaffold"][0]["state"], "candidate");

    let (st, geo, _) = call(&app, "GET", &format!("/sessions/{id}/geometry"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(!geo["suggestions"].as_array().unwrap().is_empty());

    let (st, flex, _) = call(&app, "GET", &format!("/sessions/{id}/flexibility?method=gnm,anm"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(flex["methods"], json!(["gnm", "anm"]));
    assert!(flex["method_correlation"].is_object());

    let (st, xc, _) = call(
        &app,
        "GET",
        &format!("/sessions/{id}/xcorr?sort=Maximal%20SS%20to%20Coil"),
        None,
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{xc}");
    assert_eq!(xc["columns"], json!([lid]));
    assert_eq!(xc["metric"], "ss_to_coil");

    let (st, _, _) = call(&app, "GET", &format!("/sessions/{id}/xcorr?sort=bogus"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, p, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/pairings"),
        Some(json!({"default": true})),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{p}");
    assert_eq!(p["pairings"].as_array().unwrap().len(), 1);

    let (st, _, _) = call(&app, "POST", &format!("/sessions/{id}/graft"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/phase"),
        Some(json!({"phase": "P6"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK);
    let (st, job, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/graft"),
        Some(json!({"window": 1})),
    )
    .await;
    assert_eq!(st, StatusCode::ACCEPTED, "{job}");
    let jid = job["id"].as_str().unwrap().to_string();

    let start = Instant::now();
    let done = loop {
        let (_, j, _) = call(&app, "GET", &format!("/jobs/{jid}"), None).await;
        if j["state"] == "done" || j["state"] == "failed" {
            break j;
        }
        assert!(start.elapsed() < Duration::from_secs(120));
        tokio::time::sleep(Duration::from_millis(20)).await;
    };
    assert_eq!(done["state"], "done", "{done}");
    let (_, again, _) = call(&app, "GET", &format!("/jobs/{jid}"), None).await;
    assert_eq!(again, done);
    let mid = done["ranked_model_ids"][0].as_str().unwrap();
    let (st, _, pdb) = call(&app, "GET", &format!("/models/{mid}.pdb"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(pdb.contains("ATOM"));
    let (st, _, csv) = call(&app, "GET", &format!("/models/{mid}.csv"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert!(csv.starts_with("index,seq_num,residue,origin"));

    // Demoting the paired loop drops the pairing and steps the phase back.
    let (_, _, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/loops/{lid}/triage"),
        Some(json!({"state": "preserved"})),
    )
    .await;
    let (_, v, _) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "P4");
    assert!(v["pairings"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn ss_override_and_persistence() {
    let app = app();
    let id = new_session(&app).await;
    let (st, v, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/ss-override"),
        Some(json!({"role": "scaffold", "start": 13, "end": 14, "class": "E"})),
    )
    .await;
    assert_eq!(st, StatusCode::OK, "{v}");
    assert_eq!(v["scaffold"]["overrides"].as_array().unwrap().len(), 1);
    let (st, _, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/ss-override"),
        Some(json!({"role": "scaffold", "start": 13, "end": 400, "class": "E"})),
    )
    .await;
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _, _) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/ss-override"),
        Some(json!({"role": "scaffold", "start": 1})),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, _, doc) = call(&app, "GET", &format!("/sessions/{id}/document"), None).await;
    assert_eq!(st, StatusCode::OK);
    let fresh = self::app();
    let req = Request::builder()
        .method("POST")
        .uri("/sessions/load")
        .body(Body::from(doc))
        .unwrap();
    let resp = fresh.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::CREATED);
    let (_, v, _) = call(&fresh, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["scaffold"]["overrides"][0]["class"], "E");

    let req = Request::builder()
        .method("POST")
        .uri("/sessions/load")
        .body(Body::from("{\"schema_version\": 9}"))
        .unwrap();
    let resp = fresh.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn missing_resources() {
    let app = app();
    let (st, v, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownSession");
    let (st, v, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"scaffold": "9zzz:A", "insert": "2ins:A"})),
    )
    .await;
    assert_eq!(st, StatusCode::NOT_FOUND, "{v}");
    let (st, _, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"scaffold": "1scf", "insert": "2ins:A"})),
    )
    .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _, _) = call(&app, "GET", "/jobs/job-1", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _, _) = call(&app, "GET", "/models/x.pdb", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}
