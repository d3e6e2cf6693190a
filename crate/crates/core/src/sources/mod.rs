//! Citation resolution: fetch cited URLs, convert them to markdown, and
//! cache everything for offline, reproducible runs.

mod cache;
mod markdown;

pub use cache::SourceCache;
pub use markdown::to_markdown;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::util::{sha256_hex, Semaphore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceStatus {
    Resolved,
    Unreachable,
    NonHtml,
}

/// A resolved (or failed) citation target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub source_ref: String,
    pub status: SourceStatus,
    /// Converted text; present exactly when `status == Resolved`.
    pub markdown: Option<String>,
    pub content_hash: Option<String>,
    pub fetched_at: String,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cache index line {line} is malformed")]
    BadIndexLine { line: usize },
    #[error("offline run requires a cache hit for {0}")]
    OfflineMiss(String),
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

#[derive(Debug, Clone)]
pub struct FetchPolicy {
    /// Require 100% cache hits; any miss fails fast.
    pub offline: bool,
    pub timeout_secs: u64,
    pub max_redirects: usize,
    /// Minimum spacing between requests to the same host.
    pub per_host_delay_ms: u64,
    /// Global in-flight fetch limit.
    pub concurrency: usize,
    pub user_agent: String,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            offline: false,
            timeout_secs: 30,
            max_redirects: 5,
            per_host_delay_ms: 500,
            concurrency: 4,
            user_agent: format!("reporteval/{}", env!("CARGO_PKG_VERSION")),
        }
    }
}

impl FetchPolicy {
    pub fn offline() -> Self {
        Self {
            offline: true,
            ..Self::default()
        }
    }
}

/// Cache-backed source resolver.
pub struct SourceStore {
    cache: SourceCache,
    policy: FetchPolicy,
    client: OnceLock<reqwest::blocking::Client>,
    host_last: Mutex<HashMap<String, Instant>>,
    limiter: Semaphore,
}

impl SourceStore {
    pub fn new(cache: SourceCache, policy: FetchPolicy) -> Self {
        let limiter = Semaphore::new(policy.concurrency);
        Self {
            cache,
            policy,
            client: OnceLock::new(),
            host_last: Mutex::new(HashMap::new()),
            limiter,
        }
    }

    pub fn cache(&self) -> &SourceCache {
        &self.cache
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Resolve one citation target. Cache hits return without network; in
    /// offline mode a miss is an error. Non-URL references (labels from a
    /// reference list with no link) resolve to `Unreachable`.
    pub fn fetch_source(&self, source_ref: &str) -> Result<SourceDocument, SourceError> {
        if let Some(doc) = self.cache.get(source_ref) {
            return Ok(doc);
        }
        if self.policy.offline {
            return Err(SourceError::OfflineMiss(source_ref.to_string()));
        }
        let doc = if is_fetchable_url(source_ref) {
            self.fetch_url(source_ref)?
        } else {
            failure(source_ref, SourceStatus::Unreachable)
        };
        self.cache.put(&doc)?;
        Ok(doc)
    }

    fn http_client(&self) -> Result<&reqwest::blocking::Client, SourceError> {
        if let Some(client) = self.client.get() {
            return Ok(client);
        }
        let built = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.policy.timeout_secs))
            .redirect(reqwest::redirect::Policy::limited(
                self.policy.max_redirects,
            ))
            .user_agent(self.policy.user_agent.clone())
            .build()
            .map_err(|e| SourceError::Client(e.to_string()))?;
        let _ = self.client.set(built);
        Ok(self.client.get().expect("client just set"))
    }

    /// Sleep as needed to keep `per_host_delay_ms` between hits on a host.
    fn politeness_wait(&self, host: &str) {
        let delay = Duration::from_millis(self.policy.per_host_delay_ms);
        if delay.is_zero() {
            return;
        }
        loop {
            let wait = {
                let mut last = self.host_last.lock().expect("host map poisoned");
                let now = Instant::now();
                match last.get(host) {
                    Some(previous) if now.duration_since(*previous) < delay => {
                        Some(delay - now.duration_since(*previous))
                    }
                    _ => {
                        last.insert(host.to_string(), now);
                        None
                    }
                }
            };
            match wait {
                Some(pause) => std::thread::sleep(pause),
                None => return,
            }
        }
    }

    fn fetch_url(&self, url: &str) -> Result<SourceDocument, SourceError> {
        let client = self.http_client()?;
        let host = host_of(url).unwrap_or_default();
        let _permit = self.limiter.acquire();
        self.politeness_wait(&host);

        let response = match client.get(url).send() {
            Ok(response) => response,
            Err(_) => return Ok(failure(url, SourceStatus::Unreachable)),
        };
        if !response.status().is_success() {
            return Ok(failure(url, SourceStatus::Unreachable));
        }
        let content_type = response
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("text/html")
            .to_ascii_lowercase();
        let textual = content_type.contains("html")
            || content_type.contains("text/")
            || content_type.contains("markdown")
            || content_type.contains("xml");
        if !textual {
            return Ok(failure(url, SourceStatus::NonHtml));
        }
        let body = match response.text() {
            Ok(body) => body,
            Err(_) => return Ok(failure(url, SourceStatus::Unreachable)),
        };
        let markdown = to_markdown(&body);
        if markdown.trim().is_empty() {
            return Ok(failure(url, SourceStatus::NonHtml));
        }
        Ok(SourceDocument {
            source_ref: url.to_string(),
            status: SourceStatus::Resolved,
            content_hash: Some(sha256_hex(markdown.as_bytes())),
            markdown: Some(markdown),
            fetched_at: now_rfc3339(),
        })
    }
}

fn failure(source_ref: &str, status: SourceStatus) -> SourceDocument {
    SourceDocument {
        source_ref: source_ref.to_string(),
        status,
        markdown: None,
        content_hash: None,
        fetched_at: now_rfc3339(),
    }
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn is_fetchable_url(reference: &str) -> bool {
    reference.starts_with("http://") || reference.starts_with("https://")
}

fn host_of(url: &str) -> Option<String> {
    let rest = url.split_once("://")?.1;
    let host = rest.split(['/', '?', '#']).next()?;
    Some(host.to_string())
}

/// Build a resolved document directly from markdown, used to pre-seed
/// caches for offline fixtures and tests.
pub fn resolved_document(source_ref: &str, markdown: &str) -> SourceDocument {
    SourceDocument {
        source_ref: source_ref.to_string(),
        status: SourceStatus::Resolved,
        content_hash: Some(sha256_hex(markdown.as_bytes())),
        markdown: Some(markdown.to_string()),
        fetched_at: "1970-01-01T00:00:00Z".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    fn offline_store(dir: &std::path::Path) -> SourceStore {
        SourceStore::new(SourceCache::open(dir).unwrap(), FetchPolicy::offline())
    }

    #[test]
    fn cache_hit_needs_no_network() {
        let dir = tempfile::tempdir().unwrap();
        let store = offline_store(dir.path());
        store
            .cache()
            .put(&resolved_document("key-1", "cached body"))
            .unwrap();
        let doc = store.fetch_source("key-1").unwrap();
        assert_eq!(doc.status, SourceStatus::Resolved);
        assert_eq!(doc.markdown.unwrap(), "cached body");
    }

    #[test]
    fn offline_miss_fails_fast() {
        let dir = tempfile::tempdir().unwrap();
        let store = offline_store(dir.path());
        match store.fetch_source("https://never.cached.test/") {
            Err(SourceError::OfflineMiss(reference)) => {
                assert!(reference.contains("never.cached.test"))
            }
            other => panic!("expected offline miss, got {other:?}"),
        }
    }

    #[test]
    fn non_url_reference_is_unreachable() {
        let dir = tempfile::tempdir().unwrap();
        let store = SourceStore::new(
            SourceCache::open(dir.path()).unwrap(),
            FetchPolicy {
                per_host_delay_ms: 0,
                ..FetchPolicy::default()
            },
        );
        let doc = store.fetch_source("Smith et al., 2024").unwrap();
        assert_eq!(doc.status, SourceStatus::Unreachable);
        // Cached for next time.
        assert!(store.cache().contains("Smith et al., 2024"));
    }

    /// Serve canned HTTP responses on a loopback socket.
    fn serve_once(
        status_line: &'static str,
        content_type: &'static str,
        body: &'static str,
    ) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "{status_line}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}/page")
    }

    #[test]
    fn live_fetch_converts_and_caches() {
        let url = serve_once(
            "HTTP/1.1 200 OK",
            "text/html; charset=utf-8",
            "<h1>Title</h1><p>Alpha beta.</p>",
        );
        let dir = tempfile::tempdir().unwrap();
        let store = SourceStore::new(
            SourceCache::open(dir.path()).unwrap(),
            FetchPolicy {
                per_host_delay_ms: 0,
                ..FetchPolicy::default()
            },
        );
        let doc = store.fetch_source(&url).unwrap();
        assert_eq!(doc.status, SourceStatus::Resolved);
        assert_eq!(doc.markdown.as_deref(), Some("# Title\n\nAlpha beta."));
        // Second fetch is a cache hit even with the server gone.
        let again = store.fetch_source(&url).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn http_404_maps_to_unreachable() {
        let url = serve_once("HTTP/1.1 404 Not Found", "text/html", "gone");
        let dir = tempfile::tempdir().unwrap();
        let store = SourceStore::new(
            SourceCache::open(dir.path()).unwrap(),
            FetchPolicy {
                per_host_delay_ms: 0,
                ..FetchPolicy::default()
            },
        );
        let doc = store.fetch_source(&url).unwrap();
        assert_eq!(doc.status, SourceStatus::Unreachable);
    }

    #[test]
    fn unsupported_content_type_is_nonhtml() {
        let url = serve_once("HTTP/1.1 200 OK", "application/pdf", "%PDF-1.4");
        let dir = tempfile::tempdir().unwrap();
        let store = SourceStore::new(
            SourceCache::open(dir.path()).unwrap(),
            FetchPolicy {
                per_host_delay_ms: 0,
                ..FetchPolicy::default()
            },
        );
        let doc = store.fetch_source(&url).unwrap();
        assert_eq!(doc.status, SourceStatus::NonHtml);
    }
}
