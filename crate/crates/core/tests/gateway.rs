mod support;

use std::sync::Arc;
use std::time::Duration;

use axum::http::StatusCode;
use serde_json::{json, Value};

use planspace::fixtures;
use planspace::gateway::{self, router, AppState, GatewayError, ServeConfig, Store};
use planspace::session::ManualClock;

use support::{call, micro_properties};

fn app_in(dir: &std::path::Path, workers: usize, backlog: usize) -> axum::Router {
    let store = Store::open(dir).unwrap();
    router(AppState::new(store, Arc::new(ManualClock::new(1_000)), workers, backlog), None)
}

async fn micro_project(app: &axum::Router) -> String {
    let body = json!({
        "name": "micro",
        "domain": fixtures::NOMYSTERY_DOMAIN,
        "problem": fixtures::MICRO_PROBLEM,
        "properties": micro_properties(),
    });
    let (st, p) = call(app, "POST", "/api/v1/projects", Some(body)).await;
    assert_eq!(st, StatusCode::CREATED, "{p}");
    p["id"].as_str().unwrap().to_string()
}

async fn wait_job(app: &axum::Router, id: &str) -> Value {
    let mut seen = Vec::new();
    for _ in 0..600 {
        let (st, job) = call(app, "GET", &format!("/api/v1/jobs/{id}"), None).await;
        assert_eq!(st, StatusCode::OK);
        let status = job["status"].as_str().unwrap().to_string();
        if seen.last() != Some(&status) {
            seen.push(status.clone());
        }
        if status == "DONE" || status == "FAILED" {
            let order = ["QUEUED", "RUNNING", "DONE", "FAILED"];
            let ranks: Vec<usize> = seen.iter().map(|s| order.iter().position(|o| o == s).unwrap()).collect();
            assert!(ranks.windows(2).all(|w| w[0] < w[1]), "non-monotone status sequence {seen:?}");
            return job;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    panic!("job {id} did not finish");
}

async fn micro_demo(app: &axum::Router) -> String {
    let pid = micro_project(app).await;
    let (st, job) = call(app, "POST", &format!("/api/v1/projects/{pid}/demo"), None).await;
    assert_eq!(st, StatusCode::ACCEPTED);
    let job = wait_job(app, job["id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "DONE", "{job}");
    job["result"]["demo_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_reports_version() {
    let dir = tempfile::tempdir().unwrap();
    let (st, v) = call(&app_in(dir.path(), 1, 4), "GET", "/api/v1/health", None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["schema_version"], 1);
}

#[tokio::test]
async fn project_editing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let pid = micro_project(&app).await;
    let (st, p) = call(&app, "GET", &format!("/api/v1/projects/{pid}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(p["properties"].as_array().unwrap().len(), 3);

    let prop = json!({ "nl_text": "p in t", "kind": "GOAL_FACT", "formula": "(in p t)", "utility": 1 });
    let (st, added) = call(&app, "POST", &format!("/api/v1/projects/{pid}/properties"), Some(prop.clone())).await;
    assert_eq!(st, StatusCode::CREATED, "{added}");
    assert_eq!(added["id"], "4");
    let mut dup = prop.clone();
    dup["id"] = json!("4");
    let (st, e) = call(&app, "POST", &format!("/api/v1/projects/{pid}/properties"), Some(dup)).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("DUPLICATE_PROPERTY")));
    let bad = json!({ "nl_text": "x", "kind": "GOAL_FACT", "formula": "(at q l9)" });
    let (st, e) = call(&app, "POST", &format!("/api/v1/projects/{pid}/properties"), Some(bad)).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("UNKNOWN_ATOM")));
    assert!(e["message"].is_string());

    let (_, p) = call(&app, "GET", &format!("/api/v1/projects/{pid}"), None).await;
    assert_eq!(p["properties"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn template_instantiation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let body = json!({
        "domain": fixtures::NOMYSTERY_DOMAIN,
        "problem": fixtures::NOMYSTERY_PROBLEM,
        "templates": fixtures::nomystery_templates(),
    });
    let (st, p) = call(&app, "POST", "/api/v1/projects", Some(body)).await;
    assert_eq!(st, StatusCode::CREATED, "{p}");
    let pid = p["id"].as_str().unwrap();
    let req = json!({ "bindings": { "T": "red", "L1": "cafe", "L2": "packing-station" }, "utility": 2 });
    let (st, prop) = call(&app, "POST", &format!("/api/v1/projects/{pid}/templates/road-unused/instantiate"), Some(req)).await;
    assert_eq!(st, StatusCode::CREATED, "{prop}");
    assert_eq!(prop["kind"], "ACTION_SET");
    assert_eq!(prop["utility"], 2);
    let (_, p) = call(&app, "GET", &format!("/api/v1/projects/{pid}"), None).await;
    assert_eq!(p["properties"][0]["utility"], 2);
    let (st, _) = call(&app, "POST", &format!("/api/v1/projects/{pid}/templates/nope/instantiate"), Some(json!({}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn request_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let (st, e) = call(&app, "GET", "/api/v1/projects/project-99", None).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::NOT_FOUND, Some("PROJECT_NOT_FOUND")));
    let (st, e) = call(&app, "GET", "/api/v1/jobs/..%2Fetc", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND, "{e}");
    let (st, e) = call(&app, "POST", "/api/v1/projects", Some(json!({ "domain": "(define" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{e}");
    let body = json!({ "schema_version": 2, "domain": fixtures::NOMYSTERY_DOMAIN, "problem": fixtures::MICRO_PROBLEM });
    let (st, e) = call(&app, "POST", "/api/v1/projects", Some(body)).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("SCHEMA_VERSION")));
    assert_eq!(e["details"]["supported"], 1);
    let body = json!({ "domain": fixtures::NOMYSTERY_DOMAIN, "problem": "(define (problem x) (:domain other))" });
    let (st, e) = call(&app, "POST", "/api/v1/projects", Some(body)).await;
    assert_eq!(st, StatusCode::BAD_REQUEST, "{e}");
}

#[tokio::test]
async fn plan_and_mugs_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 2, 8);
    let pid = micro_project(&app).await;

    let (st, job) = call(&app, "POST", &format!("/api/v1/projects/{pid}/jobs/plan"), Some(json!({ "hard_ids": ["3"] }))).await;
    assert_eq!(st, StatusCode::ACCEPTED);
    assert_eq!(job["kind"], "PLAN");
    let done = wait_job(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["result"]["status"], "SOLVED");
    assert_eq!(done["result"]["cost"], 3);

    let (_, job) = call(&app, "POST", &format!("/api/v1/projects/{pid}/jobs/plan"), Some(json!({ "hard_ids": ["2"] }))).await;
    let done = wait_job(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["result"], json!({ "status": "UNSOLVABLE", "mugs": [["2"]] }));

    let (st, e) = call(&app, "POST", &format!("/api/v1/projects/{pid}/jobs/plan"), Some(json!({ "hard_ids": ["9"] }))).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("UNKNOWN_PROPERTY")));

    let (_, job) = call(&app, "POST", &format!("/api/v1/projects/{pid}/jobs/mugs"), None).await;
    assert_eq!(job["kind"], "MUGS");
    let done = wait_job(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(done["result"]["mugs"], json!([["2"]]));

    // finished jobs are not rewritten
    let id = job["id"].as_str().unwrap();
    let (_, again) = call(&app, "GET", &format!("/api/v1/jobs/{id}"), None).await;
    assert_eq!(again, done);
}

#[tokio::test]
async fn demo_builds_are_reused() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let pid = micro_project(&app).await;
    let (_, first) = call(&app, "POST", &format!("/api/v1/projects/{pid}/demo"), None).await;
    assert_eq!(first["kind"], "DEMO_BUILD");
    let first = wait_job(&app, first["id"].as_str().unwrap()).await;
    assert_eq!(first["result"]["reused"], false);
    let demo_id = first["result"]["demo_id"].as_str().unwrap();

    let (st, second) = call(&app, "POST", &format!("/api/v1/projects/{pid}/demo"), None).await;
    assert_eq!(st, StatusCode::ACCEPTED);
    assert_eq!(second["status"], "DONE");
    assert_eq!(second["result"]["reused"], true);
    assert_eq!(second["result"]["demo_id"], demo_id);

    let (st, demo) = call(&app, "GET", &format!("/api/v1/demos/{demo_id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(demo["catalog"]["mugs"], json!([["2"]]));

    // a property change gives a new content hash and a fresh build
    let prop = json!({ "nl_text": "p in t", "kind": "GOAL_FACT", "formula": "(in p t)", "utility": 1 });
    call(&app, "POST", &format!("/api/v1/projects/{pid}/properties"), Some(prop)).await;
    let (_, third) = call(&app, "POST", &format!("/api/v1/projects/{pid}/demo"), None).await;
    let third = wait_job(&app, third["id"].as_str().unwrap()).await;
    assert_eq!(third["result"]["reused"], false);
    assert_ne!(third["result"]["demo_id"], demo_id);
}

#[tokio::test]
async fn unsolvable_globals_fail_the_build() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let mut props = micro_properties();
    props.push(planspace::properties::PlanProperty::goal_fact("4", "p stays", "(at p l1)").globally_hard());
    let body = json!({ "domain": fixtures::NOMYSTERY_DOMAIN, "problem": fixtures::MICRO_PROBLEM, "properties": props });
    let (_, p) = call(&app, "POST", "/api/v1/projects", Some(body)).await;
    let pid = p["id"].as_str().unwrap();
    let (_, job) = call(&app, "POST", &format!("/api/v1/projects/{pid}/demo"), None).await;
    let job = wait_job(&app, job["id"].as_str().unwrap()).await;
    assert_eq!(job["status"], "FAILED");
    assert_eq!(job["error"]["code"], "GLOBALS_UNSOLVABLE");
}

#[tokio::test]
async fn full_backlog_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 0, 0);
    let pid = micro_project(&app).await;
    let (st, e) = call(&app, "POST", &format!("/api/v1/projects/{pid}/jobs/mugs"), None).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::SERVICE_UNAVAILABLE, Some("BACKLOG_FULL")));
}

#[tokio::test]
async fn session_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let demo = micro_demo(&app).await;
    let (st, s) = call(&app, "POST", &format!("/api/v1/demos/{demo}/sessions"), Some(json!({}))).await;
    assert_eq!(st, StatusCode::CREATED, "{s}");
    assert_eq!(s["config"]["max_iterations"], 10);
    let sid = s["id"].as_str().unwrap();
    let url = |tail: &str| format!("/api/v1/sessions/{sid}/{tail}");

    let (st, e) = call(&app, "POST", &url("questions"), Some(json!({ "asked_ids": ["2"] }))).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::CONFLICT, Some("NO_CURRENT_PLAN")));

    let (st, it) = call(&app, "POST", &url("iterations"), Some(json!({ "selected_ids": [] }))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(it["result"]["status"], "PLAN");
    assert_eq!(it["schema_version"], 1);
    let (st, a) = call(&app, "POST", &url("questions"), Some(json!({ "asked_ids": ["2"] }))).await;
    assert_eq!(st, StatusCode::OK, "{a}");
    assert_eq!(a["entries"][0]["source_mugs"], json!([["2"]]));

    let (st, e) = call(&app, "POST", &url("why-unsolvable"), None).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::CONFLICT, Some("NOT_UNSOLVABLE")));
    let (_, it) = call(&app, "POST", &url("iterations"), Some(json!({ "selected_ids": ["2", "3"] }))).await;
    assert_eq!(it["result"]["status"], "UNSOLVABLE");
    let (st, why) = call(&app, "POST", &url("why-unsolvable"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(why["focused"], json!([["2"]]));

    let (st, ev) = call(&app, "POST", &url("events"), Some(json!({ "kind": "view-entered", "part": "plan" }))).await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(ev["part"], "plan");
    let (st, _) = call(&app, "POST", &url("events"), Some(json!({ "kind": "" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, log) = call(&app, "GET", &url("log"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(log["utility_series"], json!([1, null]));
    assert!(log["events"].as_array().unwrap().iter().any(|e| e["part"] == "plan"));
    let (_, again) = call(&app, "GET", &url("log"), None).await;
    assert_eq!(again, log);

    let (st, _) = call(&app, "POST", "/api/v1/sessions/session-77/iterations", Some(json!({ "selected_ids": [] }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_study_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let demo = micro_demo(&app).await;
    let (st, e) = call(&app, "POST", &format!("/api/v1/demos/{demo}/sessions"), Some(json!({ "study_config": { "max_iterations": 0 } }))).await;
    assert_eq!((st, e["code"].as_str()), (StatusCode::BAD_REQUEST, Some("INVALID_CONFIG")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_in(dir.path(), 1, 4);
    let demo = micro_demo(&app).await;
    let config = json!({ "study_config": { "questions_enabled": true, "max_iterations": 3 } });
    let (_, a) = call(&app, "POST", &format!("/api/v1/demos/{demo}/sessions"), Some(config.clone())).await;
    let (_, b) = call(&app, "POST", &format!("/api/v1/demos/{demo}/sessions"), Some(config)).await;
    let (a, b) = (a["id"].as_str().unwrap().to_string(), b["id"].as_str().unwrap().to_string());
    assert_ne!(a, b);

    let drive = |sid: String, picks: Vec<Value>| {
        let app = app.clone();
        tokio::spawn(async move {
            for sel in picks {
                let (st, _) = call(&app, "POST", &format!("/api/v1/sessions/{sid}/iterations"), Some(json!({ "selected_ids": sel }))).await;
                assert_eq!(st, StatusCode::CREATED);
            }
        })
    };
    let ta = drive(a.clone(), vec![json!([]), json!(["3"]), json!(["2"])]);
    let tb = drive(b.clone(), vec![json!(["2"])]);
    ta.await.unwrap();
    tb.await.unwrap();
    let (_, la) = call(&app, "GET", &format!("/api/v1/sessions/{a}/log"), None).await;
    let (_, lb) = call(&app, "GET", &format!("/api/v1/sessions/{b}/log"), None).await;
    assert_eq!(la["utility_series"], json!([1, 1, null]));
    assert_eq!(lb["utility_series"], json!([null]));

    // the same session from many clients at once stays consistent
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let (app, b) = (app.clone(), b.clone());
            tokio::spawn(async move { call(&app, "POST", &format!("/api/v1/sessions/{b}/iterations"), Some(json!({ "selected_ids": [] }))).await.0 })
        })
        .collect();
    let mut created = 0;
    for h in handles {
        match h.await.unwrap() {
            StatusCode::CREATED => created += 1,
            st => assert_eq!(st, StatusCode::CONFLICT),
        }
    }
    assert_eq!(created, 2);
    let (_, lb) = call(&app, "GET", &format!("/api/v1/sessions/{b}/log"), None).await;
    let idx: Vec<u64> = lb["iterations"].as_array().unwrap().iter().map(|i| i["index"].as_u64().unwrap()).collect();
    assert_eq!(idx, [1, 2, 3]);
}

#[tokio::test]
async fn state_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let demo = micro_demo(&app_in(dir.path(), 1, 4)).await;
    let app = app_in(dir.path(), 1, 4);
    let (st, _) = call(&app, "GET", &format!("/api/v1/demos/{demo}"), None).await;
    assert_eq!(st, StatusCode::OK);
    let pid = micro_project(&app).await;
    assert_eq!(pid, "project-2");
}

#[tokio::test]
async fn static_files_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<html>ui</html>").unwrap();
    let app = router(AppState::new(Store::open(dir.path()).unwrap(), Arc::new(ManualClock::new(0)), 1, 1), Some(web.path()));
    use tower::ServiceExt;
    let req = axum::http::Request::get("/index.html").body(axum::body::Body::empty()).unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    assert_eq!(&bytes[..], b"<html>ui</html>");
}

#[tokio::test]
async fn startup_errors() {
    let dir = tempfile::tempdir().unwrap();
    Store::open(dir.path()).unwrap();
    std::fs::write(dir.path().join("demos/demo-x.json"), "{ not json").unwrap();
    let config = ServeConfig { store: dir.path().to_path_buf(), port: 0, ..ServeConfig::default() };
    match gateway::bind(&config).await {
        Err(e @ GatewayError::StoreCorrupt(_)) => {
            assert_eq!(e.code(), "STORE_CORRUPT");
            assert!(e.to_string().contains("demo-x.json"));
        }
        other => panic!("expected corrupt store, got {:?}", other.err()),
    }

    let clean = tempfile::tempdir().unwrap();
    let taken = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let port = taken.local_addr().unwrap().port();
    let config = ServeConfig { store: clean.path().to_path_buf(), port, ..ServeConfig::default() };
    match gateway::bind(&config).await {
        Err(e @ GatewayError::PortInUse(p)) => {
            assert_eq!(p, port);
            assert_eq!(e.code(), "PORT_IN_USE");
        }
        other => panic!("expected port in use, got {:?}", other.err()),
    }
}
