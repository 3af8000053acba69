use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use flowdsl::backends::{Backend, BackendError, ErrorClass, GenerationRequest, HttpBackend, HttpConfig};

/// Request lines and bodies seen by the mock server.
type RequestLog = Arc<Mutex<Vec<(String, String)>>>;

#[derive(Clone)]
struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

/// Minimal HTTP/1.1 server answering every request with `reply` and
/// recording the request bodies it saw.
fn serve(reply: Reply) -> (String, RequestLog) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let reply = reply.clone();
            let log = Arc::clone(&log);
            thread::spawn(move || handle(stream, &reply, &log));
        }
    });
    (url, seen)
}

fn handle(stream: TcpStream, reply: &Reply, log: &Mutex<Vec<(String, String)>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut length = 0;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).unwrap();
        if header.trim().is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    log.lock()
        .unwrap()
        .push((request_line.trim().to_owned(), String::from_utf8(body).unwrap()));
    thread::sleep(reply.delay);
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    );
}

fn backend(url: &str, timeout_s: f64) -> HttpBackend {
    HttpBackend::new(&HttpConfig {
        timeout_s,
        ..HttpConfig::new(url)
    })
    .unwrap()
}

fn request() -> GenerationRequest {
    GenerationRequest::new("r1", "Send me the weather", 128).unwrap()
}

#[test]
fn successful_completion() {
    let (url, seen) = serve(Reply {
        status: 200,
        body:
            r#"{"text": "t = await commonTrigger.Manual({});", "prompt_tokens": 4, "completion_tokens": 11}"#
                .into(),
        delay: Duration::ZERO,
    });
    let result = backend(&url, 5.0).generate(&request()).unwrap();
    assert_eq!(result.text, "t = await commonTrigger.Manual({});");
    assert_eq!((result.prompt_tokens, result.completion_tokens), (4, 11));
    assert!(result.latency_s > 0.0);
    let seen = seen.lock().unwrap();
    assert!(seen[0].0.starts_with("POST /v1/completions "));
    let body: serde_json::Value = serde_json::from_str(&seen[0].1).unwrap();
    assert_eq!(
        body,
        serde_json::json!({"prompt": "Send me the weather", "max_tokens": 128})
    );
}

#[test]
fn non_success_status() {
    let (url, _) = serve(Reply {
        status: 503,
        body: "overloaded".into(),
        delay: Duration::ZERO,
    });
    let err = backend(&url, 5.0).generate(&request()).unwrap_err();
    assert_eq!(
        err,
        BackendError::Status {
            status: 503,
            body: "overloaded".into()
        }
    );
    assert_eq!(err.class(), ErrorClass::Non2xx);
}

#[test]
fn slow_server_times_out() {
    let (url, _) = serve(Reply {
        status: 200,
        body: "{}".into(),
        delay: Duration::from_secs(3),
    });
    let started = std::time::Instant::now();
    let err = backend(&url, 0.3).generate(&request()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Timeout, "{err}");
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[test]
fn malformed_body_is_transport_failure() {
    let (url, _) = serve(Reply {
        status: 200,
        body: "not json".into(),
        delay: Duration::ZERO,
    });
    let err = backend(&url, 5.0).generate(&request()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Transport);
}

#[test]
fn concurrent_callers_share_one_client() {
    let (url, seen) = serve(Reply {
        status: 200,
        body: r#"{"text": "x", "prompt_tokens": 1, "completion_tokens": 1}"#.into(),
        delay: Duration::from_millis(20),
    });
    let backend = Arc::new(backend(&url, 5.0));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let backend = Arc::clone(&backend);
            thread::spawn(move || backend.generate(&request()).is_ok())
        })
        .collect();
    assert!(handles.into_iter().all(|h| h.join().unwrap()));
    assert_eq!(seen.lock().unwrap().len(), 8);
}
