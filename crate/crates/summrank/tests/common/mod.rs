//! A minimal HTTP/1.1 server for exercising the scorer client.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

pub struct Request {
    pub method: String,
    pub path: String,
    pub body: Value,
}

pub enum Reply {
    Json(u16, Value),
    /// Close the connection without answering.
    Drop,
}

type Handler = dyn Fn(usize, &Request) -> Reply + Send + Sync;

pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
    pub peak_in_flight: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
}

impl MockServer {
    /// `handler` receives the 0-based request number and the request.
    pub fn start(handler: impl Fn(usize, &Request) -> Reply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        listener.set_nonblocking(true).unwrap();
        let handler: Arc<Handler> = Arc::new(handler);
        let requests = Arc::new(Mutex::new(Vec::new()));
        let peak = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let counter = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        {
            let (requests, peak, stop) = (requests.clone(), peak.clone(), stop.clone());
            thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let (handler, requests, peak, counter, in_flight) =
                                (handler.clone(), requests.clone(), peak.clone(), counter.clone(), in_flight.clone());
                            thread::spawn(move || {
                                let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                                peak.fetch_max(now, Ordering::SeqCst);
                                serve(stream, &*handler, &requests, &counter);
                                in_flight.fetch_sub(1, Ordering::SeqCst);
                            });
                        }
                        Err(_) => thread::sleep(Duration::from_millis(2)),
                    }
                }
            });
        }
        Self { url, requests, peak_in_flight: peak, stop }
    }

    pub fn score_requests(&self) -> usize {
        self.requests.lock().unwrap().iter().filter(|r| r.path == "/v1/score").count()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn serve(stream: TcpStream, handler: &Handler, requests: &Mutex<Vec<Request>>, counter: &AtomicUsize) {
    stream.set_nonblocking(false).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).unwrap();
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap();
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    let body = if body.is_empty() { Value::Null } else { serde_json::from_slice(&body).unwrap() };
    let request = Request { method, path, body };
    let n = counter.fetch_add(1, Ordering::SeqCst);
    let reply = handler(n, &request);
    requests.lock().unwrap().push(request);
    let mut stream = stream;
    match reply {
        Reply::Drop => {}
        Reply::Json(status, value) => {
            let body = value.to_string();
            let head = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            let _ = stream.write_all(head.as_bytes());
            let _ = stream.write_all(body.as_bytes());
            let _ = stream.flush();
        }
    }
}

/// Deterministic stand-in for a model score.
pub fn fake_score(candidate: &str, source: &str) -> f64 {
    let shared = candidate.split_whitespace().filter(|w| source.split_whitespace().any(|s| s == *w)).count();
    shared as f64 / (1 + candidate.split_whitespace().count()) as f64
}

/// A well-behaved scorer service for `metrics`.
pub fn healthy(metrics: &[&str], delay_ms: u64) -> impl Fn(usize, &Request) -> Reply + Send + Sync + 'static {
    let metrics: Vec<String> = metrics.iter().map(|m| m.to_string()).collect();
    move |_, req| {
        if req.path == "/v1/health" {
            return Reply::Json(200, json!({"status": "ok", "metrics": metrics}));
        }
        thread::sleep(Duration::from_millis(delay_ms));
        let scores: Vec<f64> = req.body["pairs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| fake_score(p["candidate"].as_str().unwrap(), p["source"].as_str().unwrap()))
            .collect();
        Reply::Json(200, json!({ "scores": scores }))
    }
}
