//! JSON-over-HTTP transport shared by every remote model role.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_timeout() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_in_flight() -> usize {
    4
}
fn default_backoff() -> u64 {
    250
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default)]
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// First retry delay; doubles on every further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: String::new(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_in_flight: default_in_flight(),
            backoff_ms: default_backoff(),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() {
            return Err(Error::Config("endpoint base_url is empty".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config(format!("timeout_secs must be > 0, got {}", self.timeout_secs)));
        }
        if self.max_in_flight == 0 {
            return Err(Error::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    /// Replaces the base address with `$var` when it is set and non-empty.
    pub fn apply_env(&mut self, var: &str) {
        if let Ok(url) = std::env::var(var) {
            if !url.trim().is_empty() {
                self.base_url = url.trim().to_string();
            }
        }
    }
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    role: &'a str,
    url: &'a str,
    attempt: u32,
    request: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    response: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    latency_ms: u64,
}

enum AuditSink {
    File(BufWriter<File>),
    Memory(Vec<String>),
}

/// Append-only JSONL log of every request and raw response.
pub struct AuditLog {
    sink: Mutex<AuditSink>,
}

impl AuditLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(AuditLog {
            sink: Mutex::new(AuditSink::File(BufWriter::new(file))),
        })
    }

    pub fn in_memory() -> Self {
        AuditLog {
            sink: Mutex::new(AuditSink::Memory(Vec::new())),
        }
    }

    fn append(&self, record: &AuditRecord<'_>) {
        let line = match serde_json::to_string(record) {
            Ok(l) => l,
            Err(e) => {
                log::error!("audit record not serializable: {e}");
                return;
            }
        };
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        match &mut *sink {
            AuditSink::File(w) => {
                if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                    log::error!("audit log write failed: {e}");
                }
            }
            AuditSink::Memory(v) => v.push(line),
        }
    }

    /// Lines recorded so far by an in-memory log; empty for file logs.
    pub fn lines(&self) -> Vec<String> {
        match &*self.sink.lock().unwrap_or_else(|p| p.into_inner()) {
            AuditSink::Memory(v) => v.clone(),
            AuditSink::File(_) => Vec::new(),
        }
    }
}

/// Counting semaphore bounding concurrent calls to one endpoint.
pub struct InFlightLimiter {
    cap: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightPermit<'a>(&'a InFlightLimiter);

impl InFlightLimiter {
    pub fn new(cap: usize) -> Self {
        InFlightLimiter {
            cap: cap.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|p| p.into_inner());
        while *used >= self.cap {
            used = self.freed.wait(used).unwrap_or_else(|p| p.into_inner());
        }
        *used += 1;
        InFlightPermit(self)
    }

    pub fn in_use(&self) -> usize {
        *self.used.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|p| p.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(String),
}

/// Blocking JSON POST client with retries, exponential backoff, an in-flight
/// cap and audit logging.
pub struct HttpTransport {
    role: String,
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    limiter: InFlightLimiter,
    audit: Option<Arc<AuditLog>>,
}

impl HttpTransport {
    pub fn new(role: impl Into<String>, config: EndpointConfig, audit: Option<Arc<AuditLog>>) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpTransport {
            role: role.into(),
            limiter: InFlightLimiter::new(config.max_in_flight),
            config,
            client,
            audit,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn role(&self) -> &str {
        &self.role
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// POSTs `body` (already-serialized JSON) to `base_url + path` and returns
    /// the raw response text of the first 2xx reply.
    pub fn post(&self, path: &str, body: &str) -> Result<String> {
        let url = self.url(path);
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                let factor = 1u64 << (attempt - 2).min(16);
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms.saturating_mul(factor)));
            }
            match self.attempt(&url, body, attempt) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(msg) => {
                    log::debug!("{} attempt {attempt}/{attempts} failed: {msg}", self.role);
                    last = msg;
                }
                Attempt::Fatal(msg) => {
                    return Err(Error::Endpoint {
                        role: self.role.clone(),
                        attempts: attempt,
                        message: msg,
                    })
                }
            }
        }
        Err(Error::Endpoint {
            role: self.role.clone(),
            attempts,
            message: last,
        })
    }

    fn attempt(&self, url: &str, body: &str, attempt: u32) -> Attempt {
        let _permit = self.limiter.acquire();
        let started = Instant::now();
        let sent = self
            .client
            .post(url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send();
        let (status, text, error) = match sent {
            Ok(resp) => {
                let status = resp.status();
                match resp.text() {
                    Ok(t) => (Some(status), Some(t), None),
                    Err(e) => (Some(status), None, Some(e.to_string())),
                }
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        let latency_ms = started.elapsed().as_millis() as u64;
        if let Some(audit) = &self.audit {
            audit.append(&AuditRecord {
                role: &self.role,
                url,
                attempt,
                request: body,
                status: status.map(|s| s.as_u16()),
                response: text.as_deref(),
                error: error.clone(),
                latency_ms,
            });
        }
        match (status, text, error) {
            (Some(s), Some(t), _) if s.is_success() => Attempt::Done(t),
            (Some(s), t, _) if s.as_u16() == 429 || s.is_server_error() => {
                Attempt::Retry(format!("HTTP {s}: {}", t.unwrap_or_default()))
            }
            (Some(s), t, e) => Attempt::Fatal(format!("HTTP {s}: {}", t.or(e).unwrap_or_default())),
            (None, _, e) => Attempt::Retry(e.unwrap_or_default()),
        }
    }
}
