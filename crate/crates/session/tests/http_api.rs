use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cakecut::oracle::{AgentEndpoint, Query, SimulatedAgent};
use cakecut::rational::q;
use cakecut::{Instance, Interval, PieceIndex, Rational, Valuation};
use cakecut_session::{router, SessionStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or(Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn app() -> (Router, Arc<SessionStore>) {
    let store = Arc::new(SessionStore::in_memory());
    (router(store.clone()), store)
}

async fn create(app: &Router, body: Value) -> String {
    let (s, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["id"].as_str().unwrap().to_string()
}

/// Polls every guest seat and returns the one seat holding a query.
async fn poll(app: &Router, id: &str, n: u32) -> Option<(u32, Value)> {
    let mut found = None;
    for agent in 1..=n + 1 {
        let (s, v) = call(app, "GET", &format!("/sessions/{id}/queries/next?agent={agent}"), None).await;
        assert_eq!(s, StatusCode::OK);
        if !v["query"].is_null() {
            assert!(agent <= n, "the secret seat received a query");
            assert!(found.is_none(), "two seats hold a query at once");
            found = Some((agent, v["query"].clone()));
        }
    }
    found
}

/// Recreates the query from its JSON form so a simulated agent can answer it.
fn parse_query(store: &SessionStore, id: &str) -> Query {
    store.snapshot(id).unwrap().outstanding.clone().unwrap()
}

async fn answer_as(app: &Router, store: &SessionStore, id: &str, n: u32, vals: &[Valuation]) -> usize {
    let mut count = 0;
    while let Some((agent, json)) = poll(app, id, n).await {
        let query = parse_query(store, id);
        assert_eq!(json["agent"], agent);
        let value = SimulatedAgent::new(vals[agent as usize - 1].clone()).answer(&query).unwrap();
        let (s, v) = call(
            app,
            "POST",
            &format!("/sessions/{id}/answers"),
            Some(json!({ "agent": agent, "value": value.to_string() })),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{v}");
        count += 1;
    }
    count
}

fn thirds() -> Value {
    json!([
        { "lo": "0", "hi": "1/3" },
        { "lo": "1/3", "hi": "2/3" },
        { "lo": "2/3", "hi": "1" }
    ])
}

#[tokio::test]
async fn scripted_two_guest_uniform_session() {
    let (app, store) = app();
    let uniform = serde_json::to_value(Valuation::uniform()).unwrap();
    let id = create(
        &app,
        json!({ "guests": ["ann", "bo"], "valuations": [uniform, uniform] }),
    )
    .await;

    let (s, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "collecting-answers");
    assert_eq!(v["secret"]["id"], 3);
    assert!(v.get("transcript").is_none());

    let vals = vec![Valuation::uniform(); 2];
    let answered = answer_as(&app, &store, &id, 2, &vals).await;
    assert_eq!(answered as u64, cakecut::predicted_cut_count(2).unwrap());

    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "awaiting-secret-choice");
    assert_eq!(v["pieces"], thirds());

    let (s, _) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, v) = call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": 2 }))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["phase"], "complete");

    let (s, r) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["pieces"], thirds());
    assert_eq!(r["secret_choice"], 2);
    assert_eq!(r["allocation"]["assignment"], json!({ "1": 1, "2": 3 }));
    assert_eq!(r["report"]["verdict"], true);
    assert_eq!(r["table"].as_array().unwrap().len(), 3);

    // Matches a direct in-memory run.
    let inst = Instance::uniform(2).unwrap();
    let run = inst.dc_secret().unwrap();
    let mut t = run.transcript.clone();
    let alloc = inst.assign(&run, PieceIndex::new(2).unwrap(), &mut t).unwrap();
    assert_eq!(r["allocation"], serde_json::to_value(&alloc).unwrap());

    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    let lines: Vec<String> = v["transcript"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l.as_str().unwrap().to_string())
        .collect();
    assert_eq!(lines.join("\n") + "\n", t.to_text());
    assert!(lines.iter().all(|l| !l.starts_with("agent=3 ")));

    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": 1 }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn live_session_status_codes() {
    let (app, _store) = app();
    let (s, v) = call(&app, "POST", "/sessions", Some(json!({ "guests": [] }))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");

    let (s, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "POST", "/sessions/nope/answers", Some(json!({ "agent": 1, "value": "1/2" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let id = create(&app, json!({ "guests": ["a", "b", "c"], "secret": "eve" })).await;
    let (s, v) = call(&app, "GET", &format!("/sessions/{id}/queries/next?agent=1"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v["query"],
        json!({ "agent": 1, "kind": "cut", "start": "0", "share": "1/2", "end": "1" })
    );
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/queries/next?agent=4"), None).await;
    assert!(v["query"].is_null());
    let (s, _) = call(&app, "GET", &format!("/sessions/{id}/queries/next?agent=9"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let post = |agent: u32, value: &str| {
        let app = app.clone();
        let uri = format!("/sessions/{id}/answers");
        let body = json!({ "agent": agent, "value": value });
        async move { call(&app, "POST", &uri, Some(body)).await }
    };
    // Wrong turn and the secret seat are conflicts.
    assert_eq!(post(2, "1/2").await.0, StatusCode::CONFLICT);
    assert_eq!(post(4, "1/2").await.0, StatusCode::CONFLICT);
    // Out of range and malformed are validation errors.
    let (s, v) = post(1, "3/2").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["bounds"], json!(["0", "1"]));
    assert_eq!(post(1, "a half").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["queries_answered"], 0);

    // Decimal input is accepted and stored exactly.
    assert_eq!(post(1, "0.5").await.0, StatusCode::OK);
    let (s, _) = call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": 1 }))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(post(2, "0.5").await.0, StatusCode::OK);
    assert_eq!(post(3, "1/2").await.0, StatusCode::OK);
    // The recursion has more cuts to ask for.
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "collecting-answers");
}

#[tokio::test]
async fn live_session_runs_to_completion() {
    let (app, store) = app();
    let id = create(&app, json!({ "guests": ["a", "b", "c", "d"] })).await;
    let vals: Vec<Valuation> = (0..4).map(|i| cakecut::random_valuation(40 + i, 3).unwrap()).collect();
    let inst = Instance::new(vals.clone()).unwrap();
    let run = inst.dc_secret().unwrap();

    let cuts = answer_as(&app, &store, &id, 4, &vals).await;
    assert_eq!(cuts, run.transcript.len());
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(v["phase"], "awaiting-secret-choice");
    assert_eq!(v["pieces"], serde_json::to_value(&run.pieces).unwrap());

    for bad in [0, 6] {
        let (s, _) = call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": bad }))).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    }
    let (s, v) = call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": 1 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "assigning");
    answer_as(&app, &store, &id, 4, &vals).await;

    let (s, r) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(s, StatusCode::OK);
    let mut t = run.transcript.clone();
    let alloc = inst.assign(&run, PieceIndex::new(1).unwrap(), &mut t).unwrap();
    assert_eq!(r["allocation"], serde_json::to_value(&alloc).unwrap());
    assert!(r["report"].is_null());
    assert!(inst.verify(&run, &alloc).unwrap().verdict);
    assert_eq!(cakecut::queries_to(&t, 5), 0);
}

#[tokio::test]
async fn event_logs_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(SessionStore::open(dir.path()).unwrap());
    let app = router(store.clone());
    let id = create(&app, json!({ "guests": ["a", "b", "c"] })).await;
    let vals = vec![Valuation::uniform(); 3];
    answer_as(&app, &store, &id, 3, &vals).await;
    call(&app, "POST", &format!("/sessions/{id}/choice"), Some(json!({ "piece": 4 }))).await;
    answer_as(&app, &store, &id, 3, &vals).await;
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    let (_, status_before) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    drop(app);
    drop(store);

    let log = dir.path().join(format!("{id}.jsonl"));
    let events = cakecut_session::read_log(&log).unwrap();
    assert!(events.len() > 3);

    let reopened = Arc::new(SessionStore::open(dir.path()).unwrap());
    assert_eq!(reopened.ids(), vec![id.clone()]);
    let app = router(reopened);
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    let (_, status_after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
    assert_eq!(status_before, status_after);
    let quarters: Vec<Interval> = (0..4).map(|i| Interval::new(q(i, 4), q(i + 1, 4)).unwrap()).collect();
    assert_eq!(after["pieces"], serde_json::to_value(&quarters).unwrap());
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let (app, store) = app();
    let mut handles = Vec::new();
    for k in 1..=6u32 {
        let app = app.clone();
        let store = store.clone();
        handles.push(tokio::spawn(async move {
            let names: Vec<String> = (0..k).map(|i| format!("g{i}")).collect();
            let id = create(&app, json!({ "guests": names })).await;
            let vals = vec![Valuation::uniform(); k as usize];
            answer_as(&app, &store, &id, k, &vals).await;
            let snap = store.snapshot(&id).unwrap();
            let pieces = snap.pieces.clone().unwrap();
            let want = Rational::from_integer(1) / Rational::from_integer(k as i64 + 1);
            pieces.intervals().iter().all(|p| p.length() == want)
        }));
    }
    for h in handles {
        assert!(h.await.unwrap());
    }
    assert_eq!(store.len(), 6);
}
