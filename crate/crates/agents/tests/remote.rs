use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use pmax_agents::{ChatMessage, Provider, ProviderConfig, ProviderError, RemoteProvider};

/// Serves one request with `response`, returning what was received.
fn one_shot(response: String) -> (String, thread::JoinHandle<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let h = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut len = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            head.push_str(&line);
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        stream.write_all(response.as_bytes()).unwrap();
        (head, String::from_utf8(body).unwrap())
    });
    (url, h)
}

#[test]
fn sends_bearer_and_golden_body() {
    let json = r#"{"choices":[{"message":{"role":"assistant","content":"ok"}}]}"#;
    let reply = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{json}",
        json.len()
    );
    let (url, h) = one_shot(reply);
    std::env::set_var("PMAX_TEST_KEY_A", "k-123");
    let mut cfg = ProviderConfig::new(url, "model-x");
    cfg.credential_env = Some("PMAX_TEST_KEY_A".into());
    cfg.max_tokens = 100;
    let p = RemoteProvider::new(cfg);
    let out = p.complete(&[ChatMessage::system("s"), ChatMessage::user("u")]).unwrap();
    assert_eq!(out, "ok");
    let (head, body) = h.join().unwrap();
    assert!(head.starts_with("POST /v1/chat/completions HTTP/1.1"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer k-123"));
    assert_eq!(
        body,
        r#"{"model":"model-x","messages":[{"role":"system","content":"s"},{"role":"user","content":"u"}],"max_tokens":100}"#
    );
    assert!(!format!("{p:?}").contains("k-123"));
}

#[test]
fn http_errors_carry_status_and_retry_after() {
    let (url, h) = one_shot("HTTP/1.1 429 Too Many Requests\r\nRetry-After: 7\r\nContent-Length: 4\r\nConnection: close\r\n\r\nslow".into());
    let p = RemoteProvider::new(ProviderConfig::new(url, "m"));
    let err = p.complete(&[ChatMessage::user("u")]).unwrap_err();
    assert_eq!(
        err,
        ProviderError::HttpStatus {
            code: 429,
            body: "slow".into(),
            retry_after: Some(7)
        }
    );
    h.join().unwrap();
}

#[test]
fn silent_endpoint_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    let _keep = thread::spawn(move || {
        let conn = listener.accept();
        thread::sleep(Duration::from_secs(5));
        drop(conn);
    });
    let mut cfg = ProviderConfig::new(url, "m");
    cfg.timeout_secs = 1;
    let t0 = Instant::now();
    let err = RemoteProvider::new(cfg).complete(&[ChatMessage::user("u")]).unwrap_err();
    assert_eq!(err, ProviderError::Timeout { seconds: 1 });
    assert!(t0.elapsed() < Duration::from_secs(4));
}

#[test]
fn missing_credential_is_reported_by_name() {
    let mut cfg = ProviderConfig::new("http://127.0.0.1:9/", "m");
    cfg.credential_env = Some("PMAX_TEST_KEY_UNSET".into());
    let err = RemoteProvider::new(cfg).complete(&[ChatMessage::user("u")]).unwrap_err();
    assert_eq!(err, ProviderError::MissingCredential("PMAX_TEST_KEY_UNSET".into()));
}
