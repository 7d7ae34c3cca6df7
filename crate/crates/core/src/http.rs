//! Minimal HTTP abstraction shared by the YouTube client, the remote
//! embedding provider and the chat client.
//!
//! Three transports implement [`HttpTransport`]:
//!
//! * [`LiveTransport`] talks to the network through a blocking `reqwest` client.
//! * [`FixtureTransport`] replays recorded response bodies from a directory.
//!   Each file is named by [`fixture_key`] (SHA-256 of method, path, sorted
//!   query parameters and body, with secrets removed).
//! * [`RecordingTransport`] wraps another transport and writes every
//!   response body it sees into a fixture directory.
//!
//! [`RateLimited`] adds the shared token-bucket contract on top of any of them.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Query parameters and headers that never participate in fixture keys
/// and are never written to disk.
const SECRET_PARAMS: &[&str] = &["key", "api_key", "access_token"];

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("HTTP status {status}: {message}")]
    Status { status: u16, message: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("no recorded fixture for {method} {path} (expected {file})")]
    MissingFixture {
        method: &'static str,
        path: String,
        file: String,
    },
    #[error("fixture io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: Method,
    /// Path relative to the transport's base URL, e.g. `/youtube/v3/search`.
    pub path: String,
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

impl Request {
    pub fn get(path: impl Into<String>) -> Self {
        Request {
            method: Method::Get,
            path: path.into(),
            query: Vec::new(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post_json(path: impl Into<String>, body: &serde_json::Value) -> Self {
        Request {
            method: Method::Post,
            path: path.into(),
            query: Vec::new(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(body.to_string()),
        }
    }

    pub fn param(mut self, name: &str, value: impl Into<String>) -> Self {
        self.query.push((name.to_string(), value.into()));
        self
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError>;
}

impl<T: HttpTransport + ?Sized> HttpTransport for &T {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

impl<T: HttpTransport + ?Sized> HttpTransport for Box<T> {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        (**self).send(request)
    }
}

/// Hex SHA-256 over method, path, sorted non-secret query parameters and body.
pub fn fixture_key(request: &Request) -> String {
    let mut params: Vec<&(String, String)> = request
        .query
        .iter()
        .filter(|(k, _)| !SECRET_PARAMS.contains(&k.as_str()))
        .collect();
    params.sort();
    let mut hasher = Sha256::new();
    hasher.update(request.method.as_str().as_bytes());
    hasher.update(b" ");
    hasher.update(request.path.as_bytes());
    for (k, v) in params {
        hasher.update(b"\n");
        hasher.update(k.as_bytes());
        hasher.update(b"=");
        hasher.update(v.as_bytes());
    }
    if let Some(body) = &request.body {
        hasher.update(b"\n\n");
        hasher.update(body.as_bytes());
    }
    hex::encode(hasher.finalize())
}

pub fn fixture_path(dir: &Path, request: &Request) -> PathBuf {
    dir.join(format!("{}.json", fixture_key(request)))
}

/// Writes `body` as the recorded response for `request`.
pub fn write_fixture(dir: &Path, request: &Request, body: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = fixture_path(dir, request);
    fs::write(&path, body)?;
    Ok(path)
}

/// Replays recorded bodies. A body shaped like a Google API error
/// (`{"error": {"code": 403, ...}}`) is returned with that status code.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl HttpTransport for FixtureTransport {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        let path = fixture_path(&self.dir, request);
        let body = match fs::read_to_string(&path) {
            Ok(body) => body,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(TransportError::MissingFixture {
                    method: request.method.as_str(),
                    path: request.path.clone(),
                    file: path.display().to_string(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let status = serde_json::from_str::<serde_json::Value>(&body)
            .ok()
            .and_then(|v| v.get("error")?.get("code")?.as_u64())
            .map(|c| c as u16)
            .unwrap_or(200);
        Ok(HttpResponse { status, body })
    }
}

/// Passes requests through and stores each response body as a fixture.
pub struct RecordingTransport<T> {
    inner: T,
    dir: PathBuf,
}

impl<T: HttpTransport> RecordingTransport<T> {
    pub fn new(inner: T, dir: impl Into<PathBuf>) -> Self {
        RecordingTransport {
            inner,
            dir: dir.into(),
        }
    }
}

impl<T: HttpTransport> HttpTransport for RecordingTransport<T> {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        write_fixture(&self.dir, request, &response.body)?;
        Ok(response)
    }
}

/// Blocking network transport rooted at `base_url`.
pub struct LiveTransport {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl LiveTransport {
    pub fn new(base_url: impl Into<String>) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(LiveTransport {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }
}

impl HttpTransport for LiveTransport {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        let url = format!("{}{}", self.base_url, request.path);
        let mut builder = match request.method {
            Method::Get => self.client.get(&url),
            Method::Post => self.client.post(&url),
        };
        builder = builder.query(&request.query);
        for (k, v) in &request.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Token bucket shared by every request that goes through it: at most
/// `rate` requests per second on average, with bursts up to `burst`.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64) -> Self {
        let burst = rate_per_sec.max(1.0);
        RateLimiter {
            rate: rate_per_sec,
            burst,
            state: Mutex::new((burst, Instant::now())),
        }
    }

    /// A limiter that never waits.
    pub fn unlimited() -> Self {
        RateLimiter::new(f64::INFINITY)
    }

    pub fn acquire(&self) {
        if !self.rate.is_finite() {
            return;
        }
        loop {
            let wait = {
                let mut state = self.state.lock().expect("rate limiter poisoned");
                let now = Instant::now();
                let elapsed = now.duration_since(state.1).as_secs_f64();
                state.0 = (state.0 + elapsed * self.rate).min(self.burst);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                (1.0 - state.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

pub struct RateLimited<T> {
    inner: T,
    limiter: RateLimiter,
}

impl<T: HttpTransport> RateLimited<T> {
    pub fn new(inner: T, rate_per_sec: f64) -> Self {
        RateLimited {
            inner,
            limiter: RateLimiter::new(rate_per_sec),
        }
    }
}

impl<T: HttpTransport> HttpTransport for RateLimited<T> {
    fn send(&self, request: &Request) -> Result<HttpResponse, TransportError> {
        self.limiter.acquire();
        self.inner.send(request)
    }
}
