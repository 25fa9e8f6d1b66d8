//! Chat-completion providers: an OpenAI-compatible HTTP client and a
//! deterministic replay provider for offline runs and tests.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One message of a chat transcript. Content is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    fn new(role: Role, content: impl Into<String>) -> Self {
        let content = content.into();
        assert!(!content.is_empty(), "chat message content must be non-empty");
        ChatMessage { role, content }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage::new(Role::Assistant, content)
    }
}

/// Per-request sampling parameters chosen by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequestParams {
    pub temperature: f64,
}

/// A provider reply plus how many attempts the request took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub content: String,
    pub attempts: u32,
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {code}")]
    Status { code: u16, retry_after: Option<u64> },
    #[error("malformed provider response: {0}")]
    Protocol(String),
    #[error("api key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("no replay entry for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Abstract chat-completion backend. Implementations must be safe for
/// concurrent callers.
pub trait ChatProvider: Send + Sync {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &RequestParams,
    ) -> Result<Completion, ProviderError>;
}

/// Canonical request digest: SHA-256 over the JSON transcript
/// `[{"role":…,"content":…},…]`, hex-encoded. Keys replay entries.
pub fn request_digest(messages: &[ChatMessage]) -> String {
    let canonical = serde_json::to_string(messages).expect("chat messages always serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// HTTP provider configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Default sampling temperature for generation calls.
    pub temperature: f64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_owned(),
            model: "gpt-4.1".to_owned(),
            api_key_env: "OPENAI_API_KEY".to_owned(),
            max_in_flight: 4,
            max_attempts: 4,
            backoff_ms: 500,
            timeout_secs: 120,
            temperature: 1.0,
        }
    }
}

/// Blocking OpenAI-compatible chat-completions client with retry/backoff
/// and a shared in-flight request cap.
pub struct HttpProvider {
    cfg: ProviderConfig,
    http: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self, ProviderError> {
        if cfg.max_in_flight == 0 {
            return Err(ProviderError::InvalidConfig(
                "max_in_flight must be at least 1".to_owned(),
            ));
        }
        if cfg.max_attempts == 0 {
            return Err(ProviderError::InvalidConfig(
                "max_attempts must be at least 1".to_owned(),
            ));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpProvider {
            cfg,
            http,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        })
    }

    fn attempt(
        &self,
        key: &str,
        messages: &[ChatMessage],
        params: &RequestParams,
    ) -> Result<String, ProviderError> {
        let body = WireRequest {
            model: &self.cfg.model,
            messages,
            temperature: params.temperature,
        };
        let resp = self
            .http
            .post(&self.cfg.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = resp
                .headers()
                .get("Retry-After")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok());
            return Err(ProviderError::Status {
                code: status.as_u16(),
                retry_after,
            });
        }
        let parsed: WireResponse = resp
            .json()
            .map_err(|e| ProviderError::Protocol(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Protocol("response has no choices".to_owned()))
    }

    fn acquire(&self) -> InFlightPermit<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.cfg.max_in_flight {
            count = self.freed.wait(count).unwrap();
        }
        *count += 1;
        InFlightPermit { provider: self }
    }
}

struct InFlightPermit<'a> {
    provider: &'a HttpProvider,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut count = self.provider.in_flight.lock().unwrap();
        *count -= 1;
        self.provider.freed.notify_one();
    }
}

impl ChatProvider for HttpProvider {
    fn complete(
        &self,
        messages: &[ChatMessage],
        params: &RequestParams,
    ) -> Result<Completion, ProviderError> {
        let key = std::env::var(&self.cfg.api_key_env)
            .map_err(|_| ProviderError::MissingApiKey(self.cfg.api_key_env.clone()))?;
        let _permit = self.acquire();
        let mut backoff = self.cfg.backoff_ms;
        let mut last: Option<ProviderError> = None;
        for attempt in 1..=self.cfg.max_attempts {
            if attempt > 1 {
                let wait = match &last {
                    Some(ProviderError::Status {
                        retry_after: Some(secs),
                        ..
                    }) => Duration::from_secs(*secs),
                    _ => Duration::from_millis(backoff),
                };
                std::thread::sleep(wait);
                backoff = backoff.saturating_mul(2);
            }
            match self.attempt(&key, messages, params) {
                Ok(content) => {
                    return Ok(Completion {
                        content,
                        attempts: attempt,
                    })
                }
                Err(err) => {
                    let retryable = matches!(
                        &err,
                        ProviderError::Transport(_)
                            | ProviderError::Status { code: 429, .. }
                            | ProviderError::Status { code: 500..=599, .. }
                    );
                    if !retryable {
                        return Err(err);
                    }
                    last = Some(err);
                }
            }
        }
        Err(last.expect("at least one attempt was made"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ReplayEntry {
    One(String),
    Many(Vec<String>),
}

/// Deterministic provider replaying scripted replies keyed by request
/// digest. A digest may map to a reply sequence consumed in call order;
/// once exhausted, the last reply repeats.
pub struct ReplayProvider {
    replies: BTreeMap<String, Vec<String>>,
    cursors: Mutex<BTreeMap<String, usize>>,
}

impl ReplayProvider {
    pub fn new(replies: BTreeMap<String, Vec<String>>) -> Self {
        ReplayProvider {
            replies,
            cursors: Mutex::new(BTreeMap::new()),
        }
    }

    /// Loads a JSON object mapping digest to a reply string or reply list.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        let raw: BTreeMap<String, ReplayEntry> =
            serde_json::from_str(text).map_err(|e| ProviderError::Protocol(e.to_string()))?;
        let replies = raw
            .into_iter()
            .map(|(digest, entry)| {
                let list = match entry {
                    ReplayEntry::One(s) => vec![s],
                    ReplayEntry::Many(v) => v,
                };
                if list.is_empty() {
                    return Err(ProviderError::Protocol(format!(
                        "replay entry {digest} has an empty reply list"
                    )));
                }
                Ok((digest, list))
            })
            .collect::<Result<_, _>>()?;
        Ok(ReplayProvider::new(replies))
    }
}

impl ChatProvider for ReplayProvider {
    fn complete(
        &self,
        messages: &[ChatMessage],
        _params: &RequestParams,
    ) -> Result<Completion, ProviderError> {
        let digest = request_digest(messages);
        let Some(list) = self.replies.get(&digest) else {
            return Err(ProviderError::ReplayMiss { digest });
        };
        let mut cursors = self.cursors.lock().unwrap();
        let cursor = cursors.entry(digest).or_insert(0);
        let reply = list[(*cursor).min(list.len() - 1)].clone();
        *cursor += 1;
        Ok(Completion {
            content: reply,
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn digest_is_deterministic_and_content_sensitive() {
        let a = vec![ChatMessage::user("hello")];
        let b = vec![ChatMessage::user("hello")];
        let c = vec![ChatMessage::user("other")];
        assert_eq!(request_digest(&a), request_digest(&b));
        assert_ne!(request_digest(&a), request_digest(&c));
        assert_ne!(
            request_digest(&[ChatMessage::user("x")]),
            request_digest(&[ChatMessage::system("x")])
        );
        assert_eq!(request_digest(&a).len(), 64);
    }

    #[test]
    fn replay_sequences_consume_then_repeat_last() {
        let msgs = vec![ChatMessage::user("q")];
        let digest = request_digest(&msgs);
        let provider = ReplayProvider::new(BTreeMap::from([(
            digest,
            vec!["first".to_owned(), "second".to_owned()],
        )]));
        let params = RequestParams { temperature: 0.0 };
        assert_eq!(provider.complete(&msgs, &params).unwrap().content, "first");
        assert_eq!(provider.complete(&msgs, &params).unwrap().content, "second");
        assert_eq!(provider.complete(&msgs, &params).unwrap().content, "second");
    }

    #[test]
    fn replay_miss_names_the_digest() {
        let provider = ReplayProvider::new(BTreeMap::new());
        let msgs = vec![ChatMessage::user("q")];
        let expected = request_digest(&msgs);
        match provider.complete(&msgs, &RequestParams { temperature: 0.0 }) {
            Err(ProviderError::ReplayMiss { digest }) => assert_eq!(digest, expected),
            other => panic!("expected replay miss, got {other:?}"),
        }
    }

    #[test]
    fn replay_loads_string_and_list_entries() {
        let provider =
            ReplayProvider::from_json(r#"{"d1": "one", "d2": ["a", "b"]}"#).unwrap();
        assert_eq!(provider.replies["d1"], vec!["one"]);
        assert_eq!(provider.replies["d2"], vec!["a", "b"]);
        assert!(ReplayProvider::from_json(r#"{"d": []}"#).is_err());
        assert!(ReplayProvider::from_json("not json").is_err());
    }

    fn spawn_server(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for response in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 16384];
                let n = stream.read(&mut buf).unwrap();
                bodies.push(String::from_utf8_lossy(&buf[..n]).to_string());
                stream.write_all(response.as_bytes()).unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    fn http_ok(content: &str) -> String {
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string();
        format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            body.len(),
            body
        )
    }

    fn provider_for(endpoint: String, key_env: &str) -> HttpProvider {
        HttpProvider::new(ProviderConfig {
            endpoint,
            api_key_env: key_env.to_owned(),
            backoff_ms: 1,
            max_attempts: 3,
            ..ProviderConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn http_provider_sends_wire_shape_and_bearer() {
        let (endpoint, server) = spawn_server(vec![http_ok("hi there")]);
        std::env::set_var("KGQA_TEST_KEY_A", "sk-test");
        let provider = provider_for(endpoint, "KGQA_TEST_KEY_A");
        let got = provider
            .complete(
                &[ChatMessage::user("ping")],
                &RequestParams { temperature: 0.25 },
            )
            .unwrap();
        assert_eq!(got.content, "hi there");
        assert_eq!(got.attempts, 1);
        let request = &server.join().unwrap()[0];
        assert!(request.to_lowercase().contains("authorization: bearer sk-test"));
        assert!(request.contains(r#""temperature":0.25"#));
        assert!(request.contains(r#""role":"user""#));
    }

    #[test]
    fn http_provider_retries_429_and_records_attempts() {
        let too_many =
            "HTTP/1.1 429 Too Many Requests\r\nContent-Length: 0\r\nConnection: close\r\n\r\n"
                .to_owned();
        let (endpoint, server) = spawn_server(vec![too_many, http_ok("ok")]);
        std::env::set_var("KGQA_TEST_KEY_B", "sk-test");
        let provider = provider_for(endpoint, "KGQA_TEST_KEY_B");
        let got = provider
            .complete(&[ChatMessage::user("p")], &RequestParams { temperature: 0.0 })
            .unwrap();
        assert_eq!(got.content, "ok");
        assert_eq!(got.attempts, 2);
        assert_eq!(server.join().unwrap().len(), 2);
    }

    #[test]
    fn http_provider_requires_api_key() {
        let provider = provider_for("http://127.0.0.1:1/unused".to_owned(), "KGQA_TEST_KEY_UNSET");
        match provider.complete(&[ChatMessage::user("p")], &RequestParams { temperature: 0.0 }) {
            Err(ProviderError::MissingApiKey(name)) => assert_eq!(name, "KGQA_TEST_KEY_UNSET"),
            other => panic!("expected missing key error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ProviderConfig {
            max_in_flight: 0,
            ..ProviderConfig::default()
        };
        assert!(matches!(
            HttpProvider::new(cfg),
            Err(ProviderError::InvalidConfig(_))
        ));
    }
}
