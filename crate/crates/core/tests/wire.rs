//! Wire-contract checks: the HTTP clients are pointed at a real local
//! socket so the bytes on the wire, not just the serde types, get
//! inspected.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use base64::Engine;
use serde_json::Value;

use vlmkit::curate::{HttpJudgeClient, JudgeClient};
use vlmkit::eval::{
    run_benchmark, EvalSample, GenConfig, HttpModelClient, ModelClient, ModelRequest, Reference,
    RunOptions, TaskKind, TokenSource,
};
use vlmkit::Error;

struct Captured {
    head: String,
    body: Value,
}

/// Serve `replies` HTTP responses on a fresh port, one connection each,
/// handing every captured request back through the channel.
fn spawn_server(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for (status, reply) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            let header_end = loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
                    break pos + 4;
                }
            };
            let head = String::from_utf8_lossy(&buf[..header_end]).into_owned();
            let content_length: usize = head
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse().ok())?
                })
                .unwrap_or(0);
            while buf.len() < header_end + content_length {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
            }
            let body: Value =
                serde_json::from_slice(&buf[header_end..header_end + content_length])
                    .unwrap_or(Value::Null);
            tx.send(Captured { head, body }).unwrap();

            let response = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1/generate"), rx)
}

#[test]
fn model_client_speaks_the_documented_contract() {
    let (url, rx) = spawn_server(vec![(
        200,
        r#"{"text": "hello there", "output_tokens": 5}"#.into(),
    )]);
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("probe.png");
    std::fs::write(&img, [137u8, 80, 78, 71, 13, 10]).unwrap();

    let client = HttpModelClient::new(&url, Some("sekrit".into())).unwrap();
    let resp = client
        .generate(&ModelRequest {
            prompt: "describe the probe".into(),
            images: vec![img.display().to_string()],
            max_output_tokens: 64,
            temperature: 0.25,
        })
        .unwrap();
    assert_eq!(resp.text, "hello there");
    assert_eq!(resp.output_tokens, Some(5));

    let captured = rx.recv().unwrap();
    assert!(captured.head.to_lowercase().contains("authorization: bearer sekrit"));
    let body = captured.body.as_object().unwrap();
    let mut keys: Vec<&str> = body.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["images", "max_output_tokens", "prompt", "temperature"]);
    assert_eq!(body["prompt"], "describe the probe");
    assert_eq!(body["max_output_tokens"], 64);
    assert_eq!(body["temperature"], 0.25);
    let expect_b64 =
        base64::engine::general_purpose::STANDARD.encode([137u8, 80, 78, 71, 13, 10]);
    assert_eq!(body["images"], serde_json::json!([expect_b64]));
}

fn one_sample() -> Vec<EvalSample> {
    vec![EvalSample {
        id: "w-1".into(),
        benchmark: "wire".into(),
        task_kind: TaskKind::ExactMatch,
        prompt: "ping".into(),
        images: Vec::new(),
        reference: Reference::Text("two words".into()),
    }]
}

#[test]
fn token_source_tracks_whether_the_server_reported_counts() {
    let opts = RunOptions::default();

    let (url, _rx) = spawn_server(vec![(200, r#"{"text": "two words"}"#.into())]);
    let client = HttpModelClient::new(&url, None).unwrap();
    let results =
        run_benchmark(&client, &one_sample(), &GenConfig::default(), 1, 0, &opts).unwrap();
    assert_eq!(results[0].token_source, TokenSource::Estimated);
    assert_eq!(results[0].output_tokens, 2, "estimate should count words");
    assert_eq!(results[0].score, 1);

    let (url, _rx) = spawn_server(vec![(
        200,
        r#"{"text": "two words", "output_tokens": 17}"#.into(),
    )]);
    let client = HttpModelClient::new(&url, None).unwrap();
    let results =
        run_benchmark(&client, &one_sample(), &GenConfig::default(), 1, 0, &opts).unwrap();
    assert_eq!(results[0].token_source, TokenSource::Server);
    assert_eq!(results[0].output_tokens, 17);
}

#[test]
fn judge_client_round_trips_and_no_auth_header_without_key() {
    let (url, rx) = spawn_server(vec![(200, r#"{"text": "42"}"#.into())]);
    let judge = HttpJudgeClient::new(&url, None).unwrap();
    assert_eq!(judge.generate("what is six times seven", &[]).unwrap(), "42");

    let captured = rx.recv().unwrap();
    assert!(!captured.head.to_lowercase().contains("authorization"));
    let body = captured.body.as_object().unwrap();
    let mut keys: Vec<&str> = body.keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["images", "prompt"]);
}

#[test]
fn http_failures_surface_as_transport_errors() {
    let (url, _rx) = spawn_server(vec![(500, r#"{"text": "boom"}"#.into())]);
    let client = HttpModelClient::new(&url, None).unwrap();
    let err = client
        .generate(&ModelRequest {
            prompt: "ping".into(),
            images: Vec::new(),
            max_output_tokens: 8,
            temperature: 0.0,
        })
        .unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "got {err:?}");
    assert!(err.is_data_error(), "transport should map to a data exit");
}
