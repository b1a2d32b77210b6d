use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("unexpected response body: {0}")]
    BadBody(String),
    #[error("environment variable {0} holding the API token is not set")]
    MissingToken(String),
    #[error("no recorded response for key {0}")]
    NotRecorded(String),
    #[error("{0}")]
    Other(String),
}

/// A text-completion service.
pub trait LlmBackend: Send + Sync {
    /// Backend name and model label; part of every cache key.
    fn identity(&self) -> String;
    fn send(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Hex SHA-256 over the identity and prompt, separated by a NUL byte.
pub fn cache_key(identity: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(identity.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    raw: String,
}

/// Append-only response cache stored as JSON lines `{"key","raw"}`.
///
/// Reads are shared; writes go through one lock so lines never interleave.
pub struct ResponseCache {
    entries: RwLock<HashMap<String, String>>,
    writer: Mutex<Option<(PathBuf, File)>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache { entries: RwLock::new(HashMap::new()), writer: Mutex::new(None) }
    }

    fn read_entries(path: &Path) -> std::io::Result<HashMap<String, String>> {
        let mut entries = HashMap::new();
        if !path.exists() {
            return Ok(entries);
        }
        let text = fs::read_to_string(path)?;
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheLine>(line) {
                Ok(l) => {
                    entries.entry(l.key).or_insert(l.raw);
                }
                Err(e) => log::warn!("{}:{}: skipping unreadable cache line: {e}", path.display(), n + 1),
            }
        }
        Ok(entries)
    }

    /// Load existing entries (if the file exists) and append new ones to it.
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let entries = Self::read_entries(path)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ResponseCache { entries: RwLock::new(entries), writer: Mutex::new(Some((path.to_path_buf(), file))) })
    }

    /// Load entries without ever writing back.
    pub fn read_only(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(ResponseCache { entries: RwLock::new(Self::read_entries(path.as_ref())?), writer: Mutex::new(None) })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Record a response. Existing keys are left untouched.
    pub fn insert(&self, key: &str, raw: &str) -> std::io::Result<()> {
        let mut writer = self.writer.lock().expect("cache writer lock");
        {
            let mut entries = self.entries.write().expect("cache lock");
            if entries.contains_key(key) {
                return Ok(());
            }
            entries.insert(key.to_string(), raw.to_string());
        }
        if let Some((_, file)) = writer.as_mut() {
            let mut line = serde_json::to_string(&CacheLine { key: key.into(), raw: raw.into() })
                .expect("cache line serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }
}

type Responder = dyn Fn(&str) -> Result<String, BackendError> + Send + Sync;

/// Deterministic offline backend that counts its calls.
pub struct MockBackend {
    label: String,
    responder: Box<Responder>,
    calls: AtomicUsize,
}

impl MockBackend {
    /// Ratings derived from a hash of the prompt; the first few words of the
    /// target text are returned as the supporting span.
    pub fn new() -> Self {
        Self::from_fn("mock", |prompt| Ok(mock_completion(prompt)))
    }

    pub fn fixed(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        Self::from_fn("mock-fixed", move |_| Ok(raw.clone()))
    }

    pub fn from_fn(
        label: impl Into<String>,
        f: impl Fn(&str) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        MockBackend { label: label.into(), responder: Box::new(f), calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl LlmBackend for MockBackend {
    fn identity(&self) -> String {
        self.label.clone()
    }

    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.responder)(prompt)
    }
}

const TARGET_MARKER: &str = "Now, evaluate the following input text:\n\n";

fn mock_completion(prompt: &str) -> String {
    let digest = Sha256::digest(prompt.as_bytes());
    let rating = 1 + digest[0] % 9;
    let target = prompt.rfind(TARGET_MARKER).map(|i| &prompt[i + TARGET_MARKER.len()..]).unwrap_or("");
    // Prefix of the target ending after its fourth word, so it is a verbatim substring.
    let trimmed = target.trim_start();
    let mut end = 0;
    for w in trimmed.split_whitespace().take(4) {
        end += trimmed[end..].find(w).unwrap_or(0) + w.len();
    }
    let spans: Vec<&str> = if end == 0 { vec![] } else { vec![&trimmed[..end]] };
    json!({"rating": rating, "reasoning": "mock annotation", "supporting spans": spans}).to_string()
}

/// Serves only recorded responses, looked up by the recorded identity.
pub struct ReplayBackend {
    identity: String,
    cache: ResponseCache,
}

impl ReplayBackend {
    pub fn new(identity: impl Into<String>, cache: ResponseCache) -> Self {
        ReplayBackend { identity: identity.into(), cache }
    }

    pub fn from_file(identity: impl Into<String>, path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::new(identity, ResponseCache::read_only(path)?))
    }
}

impl LlmBackend for ReplayBackend {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        let key = cache_key(&self.identity, prompt);
        self.cache.get(&key).ok_or(BackendError::NotRecorded(key))
    }
}

/// Chat-completion endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "deepseek-r1".into(),
            temperature: 0.0,
            token_env: "LLM_API_TOKEN".into(),
            timeout_secs: 300,
        }
    }
}

/// Chat-completion backend. Sends one user message per prompt and returns
/// `choices[0].message.content`.
pub struct HttpBackend {
    config: HttpConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    /// Reads the token from the configured environment variable. A missing
    /// token is allowed for local endpoints without authentication.
    pub fn new(config: HttpConfig) -> Self {
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        HttpBackend { config, token, agent }
    }

    pub fn require_token(&self) -> Result<(), BackendError> {
        match self.token {
            Some(_) => Ok(()),
            None => Err(BackendError::MissingToken(self.config.token_env.clone())),
        }
    }
}

impl LlmBackend for HttpBackend {
    fn identity(&self) -> String {
        format!("http:{}:t={}", self.config.model, self.config.temperature)
    }

    fn send(&self, prompt: &str) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => BackendError::Status(code),
            other => BackendError::Transport(other.to_string()),
        })?;
        let value: Value = resp.body_mut().read_json().map_err(|e| BackendError::BadBody(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::BadBody("missing choices[0].message.content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_stable_hex() {
        let k = cache_key("mock", "hello");
        assert_eq!(k.len(), 64);
        assert_eq!(k, cache_key("mock", "hello"));
        assert_ne!(k, cache_key("mock2", "hello"));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        {
            let c = ResponseCache::open(&path).unwrap();
            c.insert("a", "one").unwrap();
            c.insert("a", "ignored").unwrap();
            c.insert("b", "two\nlines").unwrap();
        }
        let c = ResponseCache::read_only(&path).unwrap();
        assert_eq!(c.get("a").as_deref(), Some("one"));
        assert_eq!(c.get("b").as_deref(), Some("two\nlines"));
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
    }

    #[test]
    fn mock_is_deterministic_and_counts() {
        let m = MockBackend::new();
        let a = m.send("x\n\nNow, evaluate the following input text:\n\nI slept badly again").unwrap();
        let b = m.send("x\n\nNow, evaluate the following input text:\n\nI slept badly again").unwrap();
        assert_eq!(a, b);
        assert!(a.contains("I slept badly again"));
        assert_eq!(m.calls(), 2);
    }

    #[test]
    fn replay_misses_report_key() {
        let r = ReplayBackend::new("mock", ResponseCache::in_memory());
        assert!(matches!(r.send("p"), Err(BackendError::NotRecorded(_))));
    }
}
