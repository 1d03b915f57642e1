//! The HTTP backend against a local mock of an OpenAI-compatible endpoint.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use pat_core::gateway::{
    estimate_tokens, Backoff, CallLog, CallStatus, EndpointConfig, GatewayError, HttpBackend, ModelGateway, ModelRole,
    RoleKind,
};
use pat_core::harness::PricingTable;
use pat_core::policy::ProblemSpec;
use rust_decimal::Decimal;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    authorization: Option<String>,
    body: Value,
}

/// Serves the queued `(status, body)` replies in order, one per connection.
fn mock(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let (mut length, mut authorization) = (0, None);
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    authorization = Some(line["authorization:".len()..].trim().to_string());
                }
            }
            let mut raw = vec![0; length];
            reader.read_exact(&mut raw).unwrap();
            log.lock().unwrap().push(Seen { authorization, body: serde_json::from_slice(&raw).unwrap() });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn completion(contents: &[&str], usage: Option<(u64, u64)>) -> String {
    let choices: Vec<Value> = contents.iter().map(|c| json!({"message": {"role": "assistant", "content": c}})).collect();
    let mut body = json!({ "choices": choices });
    if let Some((p, c)) = usage {
        body["usage"] = json!({"prompt_tokens": p, "completion_tokens": c});
    }
    body.to_string()
}

fn problem() -> ProblemSpec {
    ProblemSpec {
        id: "remote".into(),
        description: "Return the sum of $a$ and $b$".into(),
        entry_point: "add(a: int, b: int) -> int".parse().unwrap(),
        provided_examples: Vec::new(),
        difficulty: None,
        depth: 0,
    }
}

fn gateway() -> ModelGateway {
    ModelGateway::new()
        .with_pricing(PricingTable::reference())
        .with_backoff(Backoff { base_ms: 1, factor: 2.0, cap_ms: 5, max_attempts: 4 })
}

fn role(kind: RoleKind, config: EndpointConfig) -> ModelRole {
    ModelRole::new(kind, "Qwen3-8B", Arc::new(HttpBackend::new(config).unwrap()))
}

const GOOD: &str = "```python\ndef add(a: int, b: int) -> int:\n    return a + b\n```";

#[test]
fn request_shape_usage_and_auth() {
    let (url, seen) = mock(vec![(200, completion(&[GOOD, GOOD], Some((1_000, 200))))]);
    std::env::set_var("PAT_TEST_TOKEN", "sekrit");
    let mut config = EndpointConfig::new(url);
    config.api_key_env = Some("PAT_TEST_TOKEN".into());
    config.seed = Some(42);
    let generator = role(RoleKind::Generator, config).with_samples(2).with_temperature(0.8);
    let mut log = CallLog::new();
    let samples = gateway().generate(&problem(), &Default::default(), &generator, &mut log).unwrap();
    assert_eq!(samples.len(), 2);
    assert!(samples.iter().all(Result::is_ok));

    let seen = seen.lock().unwrap();
    let body = &seen[0].body;
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer sekrit"));
    assert_eq!(body["model"], "Qwen3-8B");
    assert_eq!(body["n"], 2);
    assert_eq!(body["temperature"], 0.8);
    assert_eq!(body["seed"], 42);
    assert!(body.get("fingerprint").is_none());
    let roles: Vec<&str> = body["messages"].as_array().unwrap().iter().map(|m| m["role"].as_str().unwrap()).collect();
    assert_eq!(roles.first(), Some(&"system"));
    assert_eq!(roles.last(), Some(&"user"));

    assert_eq!(log.records.len(), 1);
    let r = &log.records[0];
    assert_eq!((r.prompt_tokens, r.completion_tokens, r.estimated), (1_000, 200, false));
    // 1000 · 0.18 + 200 · 0.70, per million
    assert_eq!(r.usd, "0.00032".parse::<Decimal>().unwrap());
}

#[test]
fn retryable_statuses_are_retried_and_recorded() {
    let (url, seen) = mock(vec![
        (500, "{}".into()),
        (429, "{\"error\": \"slow down\"}".into()),
        (200, completion(&["assert add(1, 2) == 3"], Some((10, 5)))),
    ]);
    let writer = role(RoleKind::TestWriter, EndpointConfig::new(url));
    let mut log = CallLog::new();
    let text = gateway().write_tests(&problem(), Some(&writer), &mut log).unwrap();
    assert_eq!(text, "assert add(1, 2) == 3");
    assert_eq!(seen.lock().unwrap().len(), 3);
    let statuses: Vec<CallStatus> = log.records.iter().map(|r| r.status).collect();
    assert_eq!(statuses, vec![CallStatus::TransportError, CallStatus::TransportError, CallStatus::Ok]);
    assert_eq!(log.records[..2].iter().map(|r| r.usd).sum::<Decimal>(), Decimal::ZERO);
}

#[test]
fn client_errors_are_fatal() {
    let (url, seen) = mock(vec![(400, "{\"error\": \"bad model\"}".into())]);
    let writer = role(RoleKind::TestWriter, EndpointConfig::new(url));
    let mut log = CallLog::new();
    let err = gateway().write_tests(&problem(), Some(&writer), &mut log).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { attempts: 1, .. }), "{err}");
    assert!(err.to_string().contains("400"));
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert_eq!(log.records.len(), 1);
}

#[test]
fn missing_usage_is_estimated_and_short_replies_padded() {
    let (url, _) = mock(vec![(200, completion(&[GOOD], None))]);
    let generator = role(RoleKind::Generator, EndpointConfig::new(url)).with_samples(3).with_max_retries(1);
    let mut log = CallLog::new();
    let samples = gateway().generate(&problem(), &Default::default(), &generator, &mut log).unwrap();
    assert_eq!(samples.len(), 3);
    assert!(samples[0].is_ok());
    assert!(samples[1..].iter().all(Result::is_err), "padded samples have no code");
    let r = &log.records[0];
    assert!(r.estimated);
    assert_eq!(r.completion_tokens, estimate_tokens(GOOD.len()));
}

#[test]
fn unreachable_endpoint_exhausts_attempts() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let writer = role(RoleKind::TestWriter, EndpointConfig::new(url));
    let mut log = CallLog::new();
    let err = gateway().write_tests(&problem(), Some(&writer), &mut log).unwrap_err();
    assert!(matches!(err, GatewayError::Transport { attempts: 4, .. }), "{err}");
    assert_eq!(log.records.len(), 4);
}
