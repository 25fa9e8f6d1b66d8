//! Client for a public SPARQL endpoint.
//!
//! Used only for staleness spot-checks against a live knowledge graph; all
//! dataset validation runs on the local engine. Requests are plain GET with
//! the query as a URL parameter, respecting a concurrency cap and retrying
//! transient failures with exponential backoff (honoring `Retry-After` when
//! the server sends one).

use std::collections::BTreeSet;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::types::{EntityId, Triple};

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("transport error talking to endpoint: {0}")]
    Transport(String),
    #[error("endpoint returned status {code}")]
    Status { code: u16, retry_after: Option<u64> },
    #[error("malformed endpoint response: {0}")]
    Protocol(String),
}

pub type RemoteResult<T> = Result<T, RemoteError>;

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub user_agent: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://query.wikidata.org/sparql".to_owned(),
            user_agent: "kgqa/0.1".to_owned(),
            timeout_secs: 60,
            max_attempts: 4,
            backoff_ms: 500,
            max_in_flight: 2,
        }
    }
}

/// Blocking SPARQL-over-HTTP client with a shared in-flight request cap.
pub struct RemoteClient {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

#[derive(Deserialize)]
struct SelectBody {
    results: SelectBindings,
}

#[derive(Deserialize)]
struct SelectBindings {
    bindings: Vec<serde_json::Map<String, serde_json::Value>>,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> RemoteResult<Self> {
        let http = reqwest::blocking::Client::builder()
            .user_agent(cfg.user_agent.clone())
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        Ok(Self {
            cfg,
            http,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        })
    }

    /// Runs a SELECT query and returns the distinct values of `var`,
    /// stripping any IRI namespace down to the final path segment.
    pub fn select(&self, query: &str, var: &str) -> RemoteResult<BTreeSet<EntityId>> {
        let body = self.fetch(query, "application/sparql-results+json")?;
        let parsed: SelectBody = serde_json::from_str(&body)
            .map_err(|e| RemoteError::Protocol(format!("bad results json: {e}")))?;
        let mut out = BTreeSet::new();
        for binding in parsed.results.bindings {
            let Some(cell) = binding.get(var) else {
                continue;
            };
            let value = cell
                .get("value")
                .and_then(|v| v.as_str())
                .ok_or_else(|| RemoteError::Protocol("binding without value".to_owned()))?;
            out.insert(EntityId::new(strip_namespace(value)));
        }
        Ok(out)
    }

    /// Runs a CONSTRUCT query and parses the N-Triples response.
    pub fn construct(&self, query: &str) -> RemoteResult<BTreeSet<Triple>> {
        let body = self.fetch(query, "application/n-triples")?;
        parse_n_triples(&body)
    }

    fn fetch(&self, query: &str, accept: &str) -> RemoteResult<String> {
        let _permit = self.acquire();
        let mut backoff = self.cfg.backoff_ms;
        let mut last: Option<RemoteError> = None;
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                let wait = match &last {
                    Some(RemoteError::Status {
                        retry_after: Some(secs),
                        ..
                    }) => Duration::from_secs(*secs),
                    _ => Duration::from_millis(backoff),
                };
                std::thread::sleep(wait);
                backoff = backoff.saturating_mul(2);
            }
            match self.attempt(query, accept) {
                Ok(body) => return Ok(body),
                Err(err) => {
                    let retryable = match &err {
                        RemoteError::Transport(_) => true,
                        RemoteError::Status { code, .. } => {
                            *code == 429 || (500..600).contains(&(*code as i32 as u32))
                        }
                        RemoteError::Protocol(_) => false,
                    };
                    if !retryable {
                        return Err(err);
                    }
                    last = Some(err);
                }
            }
        }
        Err(last.unwrap_or_else(|| RemoteError::Transport("no attempts made".to_owned())))
    }

    fn attempt(&self, query: &str, accept: &str) -> RemoteResult<String> {
        let resp = self
            .http
            .get(&self.cfg.endpoint)
            .query(&[("query", query)])
            .header("Accept", accept)
            .send()
            .map_err(|e| RemoteError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry_after = resp
                .headers()
                .get("Retry-After")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok());
            return Err(RemoteError::Status {
                code: status.as_u16(),
                retry_after,
            });
        }
        resp.text().map_err(|e| RemoteError::Transport(e.to_string()))
    }

    fn acquire(&self) -> InFlightPermit<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.cfg.max_in_flight {
            count = self.freed.wait(count).unwrap();
        }
        *count += 1;
        InFlightPermit { client: self }
    }
}

struct InFlightPermit<'a> {
    client: &'a RemoteClient,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut count = self.client.in_flight.lock().unwrap();
        *count -= 1;
        self.client.freed.notify_one();
    }
}

fn strip_namespace(iri: &str) -> &str {
    iri.rsplit(['/', '#']).next().unwrap_or(iri)
}

fn parse_n_triples(body: &str) -> RemoteResult<BTreeSet<Triple>> {
    let mut out = BTreeSet::new();
    for (lineno, raw) in body.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(stmt) = line.strip_suffix('.').map(str::trim) else {
            return Err(RemoteError::Protocol(format!(
                "n-triples line {} missing terminating dot",
                lineno + 1
            )));
        };
        let mut terms = Vec::with_capacity(3);
        let mut rest = stmt;
        while !rest.is_empty() {
            rest = rest.trim_start();
            if rest.is_empty() {
                break;
            }
            if let Some(inner) = rest.strip_prefix('<') {
                let Some(end) = inner.find('>') else {
                    return Err(RemoteError::Protocol(format!(
                        "n-triples line {} has unterminated IRI",
                        lineno + 1
                    )));
                };
                terms.push(strip_namespace(&inner[..end]).to_owned());
                rest = &inner[end + 1..];
            } else if rest.starts_with('"') {
                // Literal objects cannot name graph nodes; reject rather
                // than silently coerce them into entity ids.
                return Err(RemoteError::Protocol(format!(
                    "n-triples line {} contains a literal term",
                    lineno + 1
                )));
            } else {
                let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
                terms.push(rest[..end].to_owned());
                rest = &rest[end..];
            }
        }
        if terms.len() != 3 {
            return Err(RemoteError::Protocol(format!(
                "n-triples line {} has {} terms, expected 3",
                lineno + 1,
                terms.len()
            )));
        }
        out.insert(Triple::new(&terms[0], &terms[1], &terms[2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn spawn_server(responses: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for response in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 8192];
                let n = stream.read(&mut buf).unwrap();
                let req = String::from_utf8_lossy(&buf[..n]).to_string();
                seen.push(req.lines().next().unwrap_or_default().to_owned());
                stream.write_all(response.as_bytes()).unwrap();
            }
            seen
        });
        (format!("http://{addr}/sparql"), handle)
    }

    fn http_ok(body: &str) -> String {
        format!(
            "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
            body.len(),
            body
        )
    }

    fn client_for(endpoint: String) -> RemoteClient {
        RemoteClient::new(RemoteConfig {
            endpoint,
            backoff_ms: 1,
            max_attempts: 3,
            ..RemoteConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn select_parses_bindings_and_strips_iris() {
        let body = r#"{"results":{"bindings":[
            {"answer":{"type":"uri","value":"http://www.wikidata.org/entity/Q503508"}},
            {"answer":{"type":"uri","value":"http://www.wikidata.org/entity/Q679016"}}
        ]}}"#;
        let (endpoint, server) = spawn_server(vec![http_ok(body)]);
        let client = client_for(endpoint);
        let got = client.select("SELECT ?answer WHERE { ?a ?b ?c . }", "answer").unwrap();
        let want: BTreeSet<EntityId> =
            [EntityId::new("Q503508"), EntityId::new("Q679016")].into();
        assert_eq!(got, want);
        let requests = server.join().unwrap();
        assert!(requests[0].starts_with("GET /sparql?query="));
    }

    #[test]
    fn construct_parses_n_triples() {
        let body = "<http://w/Q1> <http://w/prop/direct/P2> <http://w/Q3> .\n";
        let (endpoint, server) = spawn_server(vec![http_ok(body)]);
        let client = client_for(endpoint);
        let got = client.construct("CONSTRUCT { ?a ?b ?c } WHERE { ?a ?b ?c . }").unwrap();
        assert_eq!(got, BTreeSet::from([Triple::new("Q1", "P2", "Q3")]));
        server.join().unwrap();
    }

    #[test]
    fn retries_on_server_error_then_succeeds() {
        let error = "HTTP/1.1 503 Service Unavailable\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_owned();
        let ok = http_ok(r#"{"results":{"bindings":[]}}"#);
        let (endpoint, server) = spawn_server(vec![error, ok]);
        let client = client_for(endpoint);
        let got = client.select("SELECT ?x WHERE { ?x ?y ?z . }", "x").unwrap();
        assert!(got.is_empty());
        assert_eq!(server.join().unwrap().len(), 2);
    }

    #[test]
    fn non_retryable_status_fails_immediately() {
        let bad = "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n".to_owned();
        let (endpoint, server) = spawn_server(vec![bad]);
        let client = client_for(endpoint);
        match client.select("nonsense", "x") {
            Err(RemoteError::Status { code: 400, .. }) => {}
            other => panic!("expected status 400 error, got {other:?}"),
        }
        assert_eq!(server.join().unwrap().len(), 1);
    }

    #[test]
    fn n_triples_rejects_literals_and_arity_errors() {
        assert!(matches!(
            parse_n_triples("<a> <b> \"literal\" .\n"),
            Err(RemoteError::Protocol(_))
        ));
        assert!(matches!(
            parse_n_triples("<a> <b> .\n"),
            Err(RemoteError::Protocol(_))
        ));
        assert!(matches!(
            parse_n_triples("<a> <b> <c>\n"),
            Err(RemoteError::Protocol(_))
        ));
    }

    #[test]
    fn strip_namespace_handles_slash_hash_and_bare() {
        assert_eq!(strip_namespace("http://www.wikidata.org/entity/Q1"), "Q1");
        assert_eq!(strip_namespace("http://example.org/ns#P5"), "P5");
        assert_eq!(strip_namespace("Q42"), "Q42");
    }
}
