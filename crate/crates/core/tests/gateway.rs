use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use flextree::gateway::{router, Gateway, GatewayConfig};
use flextree::layout::{CommandId, Level};
use flextree::session::read_transcript;
use flextree::{level1_layout, report_from_log, CharacterSet, Corpus, PredModel, TypingSession};

const TRAINING: &str = "and tell us poor benighted peasants what happened. A Demand to know what happened.";

fn models() -> Vec<PredModel> {
    let cs = CharacterSet::default();
    let corpus = Corpus::from_normalized(vec![TRAINING.to_string()], &cs).unwrap();
    (0..=3).map(|k| PredModel::train(&corpus, k, cs.clone()).unwrap()).collect()
}

fn app_with(config: GatewayConfig) -> (Arc<Gateway>, Router) {
    let gw = Arc::new(Gateway::new(models(), config));
    (gw.clone(), router(gw, None))
}

fn app() -> Router {
    app_with(GatewayConfig::default()).1
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => builder
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => builder.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn command(app: &Router, id: &str, cmd: u8, t_ms: u64) -> Value {
    let (status, v) = call(
        app,
        "POST",
        &format!("/sessions/{id}/command"),
        Some(json!({ "command_id": cmd, "t_ms": t_ms })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

fn group_labels(layout: &Value) -> Vec<Value> {
    layout["labels"].as_array().unwrap().clone()
}

#[tokio::test]
async fn healthz_lists_orders() {
    let (status, v) = call(&app(), "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, json!({ "status": "ok", "orders": [0, 1, 2, 3] }));
}

#[tokio::test]
async fn create_returns_alphabetical_layout_and_config() {
    let app = app();
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "order": 3, "target": "and tell us poor" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["config"]["order"], 3);
    assert_eq!(v["config"]["dwell_ms"], 1500);
    assert_eq!(v["config"]["target"].as_str().unwrap().len(), 16);
    assert_eq!(v["layout"]["level"], 1);

    let labels = group_labels(&v["layout"]);
    assert_eq!(labels.len(), 10);
    assert_eq!(labels[0], json!({ "kind": "group", "chars": "ABCDEFGH" }));
    assert_eq!(labels[5], json!({ "kind": "delete" }));
    assert_eq!(labels[9], json!({ "kind": "group", "chars": "\"';?|_ -" }));

    let (_, v) = call(&app, "POST", "/sessions", Some(json!({ "order": 0, "dwell_ms": 900 }))).await;
    assert_eq!(v["config"]["order"], 0);
    assert_eq!(v["config"]["dwell_ms"], 900);
    assert!(v["config"].get("target").is_none());
}

#[tokio::test]
async fn session_ids_are_unique() {
    let app = app();
    let a = create(&app, json!({ "order": 1 })).await;
    let b = create(&app, json!({ "order": 1 })).await;
    assert_ne!(a, b);
}

#[tokio::test]
async fn create_errors() {
    let app = app();
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "order": 7 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "unknown_order");
    assert!(v["message"].is_string());

    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "order": -1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "unknown_order");

    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "order": 2, "target": "café" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "malformed_target");

    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "target": "x" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"], "bad_request");
}

#[tokio::test]
async fn typing_a_letter() {
    let app = app();
    let id = create(&app, json!({ "order": 2, "target": "A Demand" })).await;

    let v = command(&app, &id, 1, 1500).await;
    assert_eq!(v["event"]["kind"], "descend");
    assert_eq!(v["level"], 2);
    let labels = group_labels(&v["layout"]);
    assert_eq!(labels[0], json!({ "kind": "char", "char": "A" }));
    assert_eq!(labels[4], json!({ "kind": "goback" }));
    assert_eq!(labels[5], json!({ "kind": "delete" }));
    assert_eq!(labels[9], json!({ "kind": "char", "char": "H" }));
    assert_eq!(v["text_entered"], "");

    let v = command(&app, &id, 1, 3000).await;
    assert_eq!(v["event"]["kind"], "char");
    assert_eq!(v["event"]["char"], "A");
    assert_eq!(v["text_entered"], "A");
    assert_eq!(v["last_five"], "A");
    assert_eq!(v["complete"], false);
    assert_eq!(v["level"], 1);
    assert_eq!(v["metrics_snapshot"]["letters"], 1.0);
    assert_eq!(v["metrics_snapshot"]["commands"], 2.0);
    assert_eq!(v["metrics_snapshot"]["empty"], false);

    let (status, view) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["text_entered"], "A");
    assert_eq!(view["event_count"], 2);
    assert_eq!(view["session_id"], id.as_str());
}

#[tokio::test]
async fn command_errors() {
    let app = app();
    let id = create(&app, json!({ "order": 1 })).await;
    for bad in [0, 11, -3, 300] {
        let (status, v) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/command"),
            Some(json!({ "command_id": bad, "t_ms": 10 })),
        )
        .await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        assert_eq!(v["error"], "bad_command_id");
    }

    let (status, v) = call(
        &app,
        "POST",
        "/sessions/nope/command",
        Some(json!({ "command_id": 1, "t_ms": 10 })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");

    command(&app, &id, 1, 5000).await;
    let (status, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/command"),
        Some(json!({ "command_id": 1, "t_ms": 4000 })),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"], "time_went_backwards");

    let (status, v) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");
}

#[tokio::test]
async fn server_clock_used_without_timestamp() {
    let app = app();
    let id = create(&app, json!({ "order": 0 })).await;
    let (status, v) = call(&app, "POST", &format!("/sessions/{id}/command"), Some(json!({ "command_id": 2 }))).await;
    assert_eq!(status, StatusCode::OK);
    assert!(v["event"]["t_ms"].is_u64());
}

#[tokio::test]
async fn metrics_for_fresh_session_are_flagged_empty() {
    let app = app();
    let id = create(&app, json!({ "order": 0 })).await;
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["empty"], true);
    assert_eq!(v["letters"], 0.0);
    assert_eq!(v["itr_com_bpm"], 0.0);

    let (status, v) = call(&app, "GET", "/sessions/none/metrics", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");
}

// Drives the direct engine alongside the gateway to pick commands for `target`.
async fn type_target(app: &Router, id: &str, target: &str, order: usize) -> (TypingSession, Value) {
    let model = Arc::new(models().remove(order));
    let mut direct = TypingSession::new(model, Some(target.to_string()), 0).unwrap();
    let mut t = 0;
    let mut last = Value::Null;
    for c in target.chars() {
        let (_, g) = direct.layout().find_group(c).unwrap();
        t += 1500;
        direct.apply_command(g, t).unwrap();
        command(app, id, g.get(), t).await;
        let (_, k) = direct.layout().find_char(c).unwrap();
        t += 1500;
        direct.apply_command(k, t).unwrap();
        last = command(app, id, k.get(), t).await;
    }
    (direct, last)
}

#[tokio::test]
async fn completed_task_metrics() {
    let app = app();
    let target = "A Demand to know what happened";
    let id = create(&app, json!({ "order": 3, "target": target })).await;
    let (_, last) = type_target(&app, &id, target, 3).await;
    assert_eq!(last["complete"], true);
    assert_eq!(last["last_five"], "pened");

    let (_, m) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(m["letters"], 30.0);
    assert!(m["commands"].as_f64().unwrap() >= 60.0);
    assert_eq!(m["duration_s"], 90.0);
    assert_eq!(m["speed_lpm"], 20.0);
}

#[tokio::test]
async fn gateway_matches_direct_engine() {
    let app = app();
    let cs = CharacterSet::default();
    let model = Arc::new(models().remove(2));
    let id = create(&app, json!({ "order": 2 })).await;
    let mut direct = TypingSession::new(model.clone(), None, 0).unwrap();

    // Fixed pseudo-random command stream covering descends, typing, go back and delete.
    let mut state = 0x2545_f491_u32;
    for step in 0..400u64 {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        let cmd = (state % 10) as u8 + 1;
        let t = (step + 1) * 700;
        let expected = direct.apply_command(CommandId::new(cmd).unwrap(), t).unwrap();
        let v = command(&app, &id, cmd, t).await;

        assert_eq!(v["event"]["kind"], expected.kind.tag());
        assert_eq!(v["event"]["text_len"], expected.text_len);
        assert_eq!(v["text_entered"], direct.text_entered());
        assert_eq!(v["last_five"], direct.last_five());
        assert_eq!(v["layout"], serde_json::to_value(direct.layout()).unwrap());
        assert_eq!(v["level"], direct.level().number());
        let report = report_from_log(direct.events(), 10, 72).unwrap();
        assert_eq!(v["metrics_snapshot"]["letters"], report.letters);
        assert_eq!(v["metrics_snapshot"]["commands"], report.commands);
    }
    assert!(direct.text_entered().chars().all(|c| cs.contains(c)));
    if direct.level() == Level::One {
        assert_eq!(*direct.layout(), level1_layout(direct.text_entered(), &model));
    }
}

#[tokio::test]
async fn sessions_are_isolated() {
    let app = app();
    let a = create(&app, json!({ "order": 1 })).await;
    let b = create(&app, json!({ "order": 1 })).await;
    // Interleave: type 'A' in a and 'I' in b.
    command(&app, &a, 1, 100).await;
    command(&app, &b, 2, 100).await;
    let va = command(&app, &a, 1, 200).await;
    let vb = command(&app, &b, 1, 200).await;
    assert_eq!(va["text_entered"], "A");
    assert_eq!(vb["text_entered"], "I");

    let (_, ma) = call(&app, "GET", &format!("/sessions/{a}"), None).await;
    assert_eq!(ma["text_entered"], "A");
    call(&app, "DELETE", &format!("/sessions/{b}"), None).await;
    let (status, _) = call(&app, "GET", &format!("/sessions/{a}"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn concurrent_sessions() {
    let gw = Arc::new(Gateway::new(models(), GatewayConfig::default()));
    let ids: Vec<String> = (0..8)
        .map(|_| {
            gw.create_session(serde_json::from_value(json!({ "order": 0 })).unwrap())
                .unwrap()
                .handle
                .session_id
        })
        .collect();
    std::thread::scope(|s| {
        for (i, id) in ids.iter().enumerate() {
            let gw = gw.clone();
            s.spawn(move || {
                // Group 1 then slot i+1 (skipping GO BACK and DELETE) types one letter per round.
                let slot = [1u8, 2, 3, 4, 7, 8, 9, 10][i];
                for r in 0..20u64 {
                    for (k, cmd) in [1u8, slot].into_iter().enumerate() {
                        let req = serde_json::from_value(json!({ "command_id": cmd, "t_ms": r * 10 + k as u64 })).unwrap();
                        gw.post_command(id, req).unwrap();
                    }
                }
            });
        }
    });
    for (i, id) in ids.iter().enumerate() {
        let c = "ABCDEFGH".chars().nth(i).unwrap();
        let view = gw.get_session(id).unwrap();
        assert_eq!(view.text_entered, c.to_string().repeat(20));
    }
}

#[tokio::test]
async fn end_session_persists_transcript_once() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app_with(GatewayConfig {
        transcript_dir: Some(dir.path().join("logs")),
        ..GatewayConfig::default()
    });
    let target = "and tell us poor";
    let id = create(&app, json!({ "order": 1, "target": target })).await;
    let (direct, _) = type_target(&app, &id, target, 1).await;
    command(&app, &id, 6, 60_000).await;

    let (status, v) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["text_entered"], "and tell us poo");
    assert_eq!(v["transcript"].as_array().unwrap().len(), 33);
    assert_eq!(v["metrics"]["letters"], 16.0);
    assert_eq!(v["metrics"]["deletion_s_per_letter"], 60.0 - 48.0);

    let path = dir.path().join("logs").join(format!("{id}.jsonl"));
    assert_eq!(v["transcript_path"], path.display().to_string());
    let file = std::fs::File::open(&path).unwrap();
    let events = read_transcript(std::io::BufReader::new(file)).unwrap();
    assert_eq!(&events[..32], direct.events());
    let replayed = TypingSession::replay(direct.model().clone(), None, &events).unwrap();
    assert_eq!(replayed.text_entered(), "and tell us poo");

    let (status, v) = call(&app, "DELETE", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_session");
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/metrics"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_files_served_beside_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>keyboard</p>").unwrap();
    let gw = Arc::new(Gateway::new(models(), GatewayConfig::default()));
    let app = router(gw, Some(dir.path().to_path_buf()));
    let resp = app
        .clone()
        .oneshot(Request::builder().uri("/index.html").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<p>keyboard</p>");
    let (status, _) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
}
