mod common;

use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use common::*;
use pmax_agents::{
    is_valid_sequence, run_turn, ChatMessage, MockProvider, Provider, ProviderError, ProgressKind, SharedState,
    TurnOptions,
};
use pmax_core::artifacts::{ArtifactStore, ExportFormat};
use pmax_core::event_log::{extract_abstraction, AbstractionOptions};
use pmax_core::script::Environment;
use pmax_service::logs::read_log;
use pmax_service::session::{default_factory, ProviderFactory};
use pmax_service::{AppConfig, AppState};
use serde_json::json;

fn server() -> String {
    spawn_server(AppState::new(AppConfig::default()))
}

fn loaded_session(base: &str, responses: &[String]) -> String {
    let id = create_mock_session(base, responses);
    let r = upload(base, &id, "loan_50.csv", fixture_text("loan_50.csv").as_bytes());
    assert_eq!(r.status, 200, "{}", r.text());
    id
}

#[test]
fn session_creation() {
    let base = server();
    let a = create_mock_session(&base, &[]);
    let b = create_mock_session(&base, &[]);
    assert_ne!(a, b);
    assert_eq!(a.len(), 32);
    assert!(a.chars().all(|c| c.is_ascii_hexdigit()));
    let r = post_json(&format!("{base}/sessions"), &json!({ "provider": { "endpoint": "http://x" } }));
    assert_eq!(r.status, 400);
    assert_eq!(r.json()["path"], "provider");
    assert!(r.json()["message"].as_str().unwrap().contains("model"));
    let r = post_json(&format!("{base}/sessions"), &json!({ "provider": { "endpoint": "http://x", "model": "" } }));
    assert_eq!((r.status, r.json()["path"].as_str()), (400, Some("provider.model")));
    let r = post_json(&format!("{base}/sessions"), &json!({ "provider": { "endpoint": "http://x", "model": "m", "timeout_secs": "soon" } }));
    assert_eq!((r.status, r.json()["path"].as_str()), (400, Some("provider.timeout_secs")));
    let r = post_json(&format!("{base}/sessions"), &json!({ "provider": { "endpoint": "x", "model": "m" }, "limits": { "engineer_max_iters": 0 } }));
    assert_eq!((r.status, r.json()["path"].as_str()), (400, Some("limits.engineer_max_iters")));
}

#[test]
fn log_upload() {
    let base = server();
    let id = create_mock_session(&base, &[]);
    let r = upload(&base, &id, "four_cases.csv", fixture_text("four_cases.csv").as_bytes());
    assert_eq!(r.status, 200, "{}", r.text());
    let abs = &r.json()["abstraction"];
    assert!(abs["columns"].as_array().unwrap().len() >= 3);
    assert_eq!(abs["case_count"], 4);
    assert_eq!(abs["roles"]["activity"], "activity");
    assert_eq!(upload(&base, "nope", "x.csv", b"a,b\n").status, 404);
    let r = upload(&base, &id, "bad.xes", fixture_text("malformed.xes").as_bytes());
    assert_eq!(r.status, 422);
    assert!(r.json()["line"].as_u64().unwrap() > 0, "{}", r.text());
    // renamed columns need hints
    let renamed = fixture_text("four_cases.csv").replacen("case,activity,time", "order,step,at", 1);
    assert_eq!(upload(&base, &id, "r.csv", renamed.as_bytes()).status, 422);
    let r = post_multipart(
        &format!("{base}/sessions/{id}/log"),
        &[
            ("file", Some("r.csv"), renamed.as_bytes()),
            ("case_id", None, b"order"),
            ("activity", None, b"step"),
        ],
    );
    assert_eq!(r.status, 200, "{}", r.text());
    assert_eq!(r.json()["abstraction"]["roles"]["case_id"], "order");
    let xes = post_multipart(
        &format!("{base}/sessions/{id}/log"),
        &[("file", None, fixture_text("malformed.xes").as_bytes()), ("format", None, b"xes")],
    );
    assert_eq!(xes.status, 422);
}

#[test]
fn query_streams_the_turn() {
    let base = server();
    let id = loaded_session(&base, &transcript("q1_transcript.json"));
    let (r, events) = query(&base, &id, "What is the typical workflow?");
    assert_eq!(r.status, 200);
    assert!(r.content_type.starts_with("text/event-stream"));
    let kinds: Vec<&str> = events.iter().map(|e| e.event.as_str()).collect();
    assert_eq!(
        kinds,
        [
            "engineer-iteration-started",
            "script-generated",
            "verification-result",
            "execution-result",
            "analyst-iteration-started",
            "report-ready"
        ]
    );
    assert!(events.iter().all(|e| e.data["kind"] == e.event.as_str() && e.data["turn"] == 1));
    assert!(events[1].data["payload"]["script"].as_str().unwrap().contains("api.discover_process_model()"));
    assert_eq!(events[2].data["payload"]["ok"], true);
    assert_eq!(events[3].data["payload"]["status"], "success");
    // listing matches the report
    let report = &events[5].data["payload"];
    let referenced: Vec<&str> = report["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|b| b["artifact_id"].as_str())
        .collect();
    let listing = get(&format!("{base}/sessions/{id}/artifacts")).json();
    let listed: Vec<&str> = listing.as_array().unwrap().iter().map(|a| a["id"].as_str().unwrap()).collect();
    assert_eq!(listed, ["art-1", "art-2", "art-3", "art-4"]);
    assert!(referenced.iter().all(|r| listed.contains(r)));
    assert!(listing.as_array().unwrap().iter().all(|a| a["turn"] == 1));
}

#[test]
fn failing_first_script_shows_two_iterations() {
    let base = server();
    let mut t = vec!["```pma\napi.bad()\n```".to_string()];
    t.extend(transcript("q1_transcript.json"));
    let id = loaded_session(&base, &t);
    let (_, events) = query(&base, &id, "q");
    let kinds: Vec<ProgressKind> = events
        .iter()
        .map(|e| serde_json::from_value(json!(e.event)).unwrap())
        .collect();
    assert!(is_valid_sequence(&kinds));
    assert_eq!(kinds.iter().filter(|k| **k == ProgressKind::EngineerIterationStarted).count(), 2);
    assert_eq!(events[2].data["payload"]["ok"], false);
    assert!(events[2].data["payload"]["diagnostics"][0].as_str().unwrap().contains("UnknownFunction"));
}

#[test]
fn query_preconditions() {
    let base = server();
    let id = create_mock_session(&base, &[]);
    assert_eq!(query(&base, &id, "q").0.status, 409);
    assert_eq!(query(&base, "missing", "q").0.status, 404);
    let r = post_json(&format!("{base}/sessions/{id}/query"), &json!({ "text": "q" }));
    assert_eq!(r.status, 400);
}

#[test]
fn provider_fault_ends_stream_with_error() {
    let base = server();
    let id = loaded_session(&base, &[]);
    let (_, events) = query(&base, &id, "q");
    assert_eq!(events.len(), 2);
    assert_eq!(events[1].event, "error");
    assert!(events[1].data["payload"]["message"].as_str().unwrap().contains("exhausted"));
    // the session is usable again afterwards
    assert_eq!(query(&base, &id, "q").0.status, 200);
}

/// Holds every completion until the test lets it through.
struct Gated {
    inner: MockProvider,
    entered: Mutex<mpsc::Sender<()>>,
    release: Mutex<mpsc::Receiver<()>>,
}

impl Provider for Gated {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        self.entered.lock().unwrap().send(()).unwrap();
        self.release.lock().unwrap().recv().unwrap();
        self.inner.complete(messages)
    }
}

#[test]
fn one_query_per_session() {
    let (entered_tx, entered_rx) = mpsc::channel();
    let (release_tx, release_rx) = mpsc::channel();
    let gate = Arc::new(Gated {
        inner: MockProvider::new(transcript("q1_transcript.json")),
        entered: Mutex::new(entered_tx),
        release: Mutex::new(release_rx),
    });
    let g = Arc::clone(&gate);
    let fallback = default_factory();
    let factory: ProviderFactory = Arc::new(move |spec| {
        if spec.provider.model == "gated" {
            Ok(Arc::clone(&g) as Arc<dyn Provider>)
        } else {
            fallback(spec)
        }
    });
    let base = spawn_server(AppState::with_factory(AppConfig::default(), factory));
    let r = post_json(&format!("{base}/sessions"), &json!({ "provider": { "endpoint": "x", "model": "gated" } }));
    let id = r.json()["session_id"].as_str().unwrap().to_string();
    assert_eq!(upload(&base, &id, "l.csv", fixture_text("loan_50.csv").as_bytes()).status, 200);
    let other = loaded_session(&base, &transcript("q1_transcript.json"));

    let (b, i) = (base.clone(), id.clone());
    let first = std::thread::spawn(move || query(&b, &i, "first"));
    entered_rx.recv_timeout(Duration::from_secs(10)).unwrap();
    assert_eq!(query(&base, &id, "second").0.status, 409);
    assert_eq!(upload(&base, &id, "l.csv", fixture_text("four_cases.csv").as_bytes()).status, 409);
    assert_eq!(get(&format!("{base}/sessions/{id}")).json()["busy"], true);
    // other sessions are not blocked
    let (r, events) = query(&base, &other, "independent");
    assert_eq!(r.status, 200);
    assert_eq!(events.last().unwrap().event, "report-ready");
    release_tx.send(()).unwrap();
    entered_rx.recv_timeout(Duration::from_secs(10)).unwrap();
    release_tx.send(()).unwrap();
    let (r, events) = first.join().unwrap();
    assert_eq!(r.status, 200);
    assert_eq!(events.last().unwrap().event, "report-ready");
    assert_eq!(get(&format!("{base}/sessions/{id}")).json()["busy"], false);
}

#[test]
fn artifact_export() {
    let base = server();
    let id = loaded_session(&base, &transcript("q1_transcript.json"));
    query(&base, &id, "What is the typical workflow?");

    // same turn computed in-process
    let log = read_log(&fixture("loan_50.csv")).unwrap();
    let mut state = SharedState::new(extract_abstraction(&log, &AbstractionOptions::default()));
    let mut env = Environment::new(log, ArtifactStore::new(), 0);
    let mock = MockProvider::new(transcript("q1_transcript.json"));
    run_turn(&mut state, "What is the typical workflow?", &mock, &TurnOptions::default(), &mut env, &mut |_| {}).unwrap();

    for (aid, format, media) in [
        ("art-1", "csv", "text/csv"),
        ("art-3", "dot", "text/vnd.graphviz"),
        ("art-3", "pnml", "application/xml"),
    ] {
        let r = get(&format!("{base}/sessions/{id}/artifacts/{aid}?format={format}"));
        assert_eq!(r.status, 200);
        assert!(r.content_type.starts_with(media), "{}", r.content_type);
        assert_eq!(r.body, env.store.export(aid, ExportFormat::parse(format).unwrap()).unwrap());
    }
    let native = get(&format!("{base}/sessions/{id}/artifacts/art-2"));
    assert_eq!(native.body, env.store.export("art-2", ExportFormat::Csv).unwrap());
    assert_eq!(get(&format!("{base}/sessions/{id}/artifacts/art-1?format=dot")).status, 415);
    assert_eq!(get(&format!("{base}/sessions/{id}/artifacts/art-1?format=gif")).status, 415);
    assert_eq!(get(&format!("{base}/sessions/{id}/artifacts/art-9")).status, 404);
    assert_eq!(get(&format!("{base}/sessions/nope/artifacts")).status, 404);
}

#[test]
fn artifacts_are_mirrored_per_session() {
    let dir = tempfile::tempdir().unwrap();
    let base = spawn_server(AppState::new(AppConfig {
        data_dir: Some(dir.path().to_path_buf()),
        ..AppConfig::default()
    }));
    let id = loaded_session(&base, &transcript("q1_transcript.json"));
    query(&base, &id, "q");
    let art = dir.path().join(&id).join("artifacts");
    assert!(art.join("art-3.dot").is_file());
    assert!(art.join("art-4.json").is_file());
}

#[test]
fn reupload_keeps_ids_unique() {
    let base = server();
    let mut t = transcript("q1_transcript.json");
    t.extend(transcript("q1_transcript.json"));
    let id = loaded_session(&base, &t);
    query(&base, &id, "q");
    assert_eq!(upload(&base, &id, "l.csv", fixture_text("loan_50.csv").as_bytes()).status, 200);
    let (_, events) = query(&base, &id, "q");
    // the canned analyst answer names ids from the first turn, which still resolve
    assert_eq!(events.last().unwrap().data["turn"], 2);
    let listing = get(&format!("{base}/sessions/{id}/artifacts")).json();
    let ids: Vec<&str> = listing.as_array().unwrap().iter().map(|a| a["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["art-1", "art-2", "art-3", "art-4", "art-5", "art-6", "art-7", "art-8"]);
}

#[test]
fn credential_never_leaves_the_environment() {
    const KEY: &str = "CRED-SENTINEL-55d1";
    std::env::set_var("PMAX_TEST_CREDENTIAL", KEY);
    let base = server();
    let r = post_json(
        &format!("{base}/sessions"),
        &json!({
            "provider": { "endpoint": "mock", "model": "m", "credential_env": "PMAX_TEST_CREDENTIAL" },
            "mock_transcript": transcript("q1_transcript.json"),
        }),
    );
    let mut bodies = vec![r.text()];
    let id = r.json()["session_id"].as_str().unwrap().to_string();
    bodies.push(upload(&base, &id, "l.csv", fixture_text("loan_50.csv").as_bytes()).text());
    bodies.push(query(&base, &id, "q").0.text());
    bodies.push(get(&format!("{base}/sessions/{id}")).text());
    bodies.push(get(&format!("{base}/sessions/{id}/artifacts")).text());
    for a in ["art-1", "art-2", "art-3", "art-4"] {
        bodies.push(get(&format!("{base}/sessions/{id}/artifacts/{a}")).text());
    }
    assert!(bodies.iter().all(|b| !b.contains(KEY)));
    let r = post_json(
        &format!("{base}/sessions"),
        &json!({ "provider": { "endpoint": "x", "model": "m", "api_key": KEY } }),
    );
    assert_eq!(r.status, 400);
    assert!(!r.text().contains(KEY));
}

#[test]
fn idle_sessions_are_evicted() {
    let app = AppState::new(AppConfig {
        idle_timeout: Duration::from_millis(50),
        ..AppConfig::default()
    });
    let base = spawn_server(app.clone());
    let id = create_mock_session(&base, &[]);
    assert_eq!(app.evict_idle(), 0);
    std::thread::sleep(Duration::from_millis(120));
    assert_eq!(app.evict_idle(), 1);
    assert_eq!(get(&format!("{base}/sessions/{id}")).status, 404);
}
