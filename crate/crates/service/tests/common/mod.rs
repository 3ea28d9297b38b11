#![allow(dead_code)]

use std::io::Read;
use std::path::PathBuf;
use std::time::Duration;

use pmax_service::{router, AppState};
use serde_json::Value;

pub const LOAN_SEED: u64 = 7;
pub const LOAN_CASES: usize = 50;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

/// Transcript file as a list of responses.
pub fn transcript(name: &str) -> Vec<String> {
    serde_json::from_str(&fixture_text(name)).unwrap()
}

/// Runs the router on an ephemeral port in a background runtime.
pub fn spawn_server(app: AppState) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, router(app)).await.unwrap();
        });
    });
    format!("http://{addr}")
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

pub struct Reply {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }

    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.text()))
    }
}

fn reply(mut r: ureq::http::Response<ureq::Body>) -> Reply {
    let status = r.status().as_u16();
    let content_type = r
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string();
    let mut body = Vec::new();
    r.body_mut().as_reader().read_to_end(&mut body).unwrap();
    Reply {
        status,
        content_type,
        body,
    }
}

pub fn get(url: &str) -> Reply {
    reply(agent().get(url).call().unwrap())
}

pub fn post_json(url: &str, body: &Value) -> Reply {
    reply(
        agent()
            .post(url)
            .header("Content-Type", "application/json")
            .send(serde_json::to_vec(body).unwrap().as_slice())
            .unwrap(),
    )
}

/// `multipart/form-data` upload. Each part is `(name, file name, bytes)`.
pub fn post_multipart(url: &str, parts: &[(&str, Option<&str>, &[u8])]) -> Reply {
    let boundary = "pmax-test-boundary-93b1";
    let mut body = Vec::new();
    for (name, file, data) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        match file {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: application/octet-stream\r\n\r\n").as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(data);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    reply(
        agent()
            .post(url)
            .header("Content-Type", &format!("multipart/form-data; boundary={boundary}"))
            .send(body.as_slice())
            .unwrap(),
    )
}

#[derive(Debug, Clone)]
pub struct SseEvent {
    pub event: String,
    pub data: Value,
}

pub fn parse_sse(text: &str) -> Vec<SseEvent> {
    let mut out = Vec::new();
    for chunk in text.split("\n\n") {
        let mut event = None;
        let mut data = String::new();
        for line in chunk.lines() {
            if let Some(v) = line.strip_prefix("event:") {
                event = Some(v.trim().to_string());
            } else if let Some(v) = line.strip_prefix("data:") {
                if !data.is_empty() {
                    data.push('\n');
                }
                data.push_str(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        if let Some(event) = event {
            out.push(SseEvent {
                event,
                data: serde_json::from_str(&data).unwrap(),
            });
        }
    }
    out
}

/// Posts a question and reads the stream to its end.
pub fn query(base: &str, session: &str, question: &str) -> (Reply, Vec<SseEvent>) {
    let r = post_json(&format!("{base}/sessions/{session}/query"), &serde_json::json!({ "question": question }));
    let events = if r.status == 200 { parse_sse(&r.text()) } else { Vec::new() };
    (r, events)
}

pub fn create_mock_session(base: &str, responses: &[String]) -> String {
    let r = post_json(
        &format!("{base}/sessions"),
        &serde_json::json!({
            "provider": { "endpoint": "mock", "model": "mock-model" },
            "mock_transcript": responses,
        }),
    );
    assert_eq!(r.status, 201, "{}", r.text());
    r.json()["session_id"].as_str().unwrap().to_string()
}

pub fn upload(base: &str, session: &str, name: &str, bytes: &[u8]) -> Reply {
    post_multipart(&format!("{base}/sessions/{session}/log"), &[("file", Some(name), bytes)])
}
