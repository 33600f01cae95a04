use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use biaslens::llm::HttpLlm;
use biaslens_core::ontology::{LlmClient, LlmError, LlmRequest};
use serde_json::Value;

/// Answer one HTTP request with `reply` and hand back (headers, body).
fn one_shot_server(status: &'static str, reply: &'static str) -> (String, mpsc::Receiver<(String, Value)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/complete", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut len = 0usize;
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
        write!(
            stream,
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
            reply.len()
        )
        .unwrap();
        tx.send((head, serde_json::from_slice(&body).unwrap())).unwrap();
    });
    (url, rx)
}

fn request() -> LlmRequest {
    LlmRequest {
        model: "m1".into(),
        temperature: 0.0,
        prompt: "Describe {this}".into(),
    }
}

#[test]
fn posts_model_temperature_prompt_and_reads_text() {
    let (url, rx) = one_shot_server("200 OK", r#"{"text": "{\"Class\": [\"A\"]}"}"#);
    let llm = HttpLlm::new(url, Some("secret".into()), Duration::from_secs(5));
    let text = llm.complete(&request()).unwrap();
    assert_eq!(text, r#"{"Class": ["A"]}"#);
    let (head, body) = rx.recv().unwrap();
    assert!(head.starts_with("POST /complete "));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer secret"));
    assert_eq!(body, serde_json::json!({"model": "m1", "temperature": 0.0, "prompt": "Describe {this}"}));
}

#[test]
fn server_errors_and_bad_bodies_are_transport_errors() {
    let (url, _rx) = one_shot_server("500 Internal Server Error", r#"{"error": "down"}"#);
    let llm = HttpLlm::new(url, None, Duration::from_secs(5));
    assert!(matches!(llm.complete(&request()), Err(LlmError::Transport(_))));

    let (url, _rx) = one_shot_server("200 OK", r#"{"answer": 1}"#);
    let llm = HttpLlm::new(url, None, Duration::from_secs(5));
    assert!(matches!(llm.complete(&request()), Err(LlmError::Transport(_))));
}

#[test]
fn refused_connection_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let llm = HttpLlm::new(format!("http://127.0.0.1:{port}/"), None, Duration::from_secs(2));
    assert!(matches!(llm.complete(&request()), Err(LlmError::Transport(_))));
}
