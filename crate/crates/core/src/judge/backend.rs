//! Judge backends: a deterministic script-driven mock and an
//! OpenAI-compatible chat-completions client.

use serde_json::json;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

use crate::util::short_hash;

#[derive(Debug, Error)]
pub enum BackendError {
    /// Worth retrying: timeouts, connection failures, 408/429/5xx.
    #[error("transient transport failure: {0}")]
    Transient(String),
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("no scripted response for prompt hash {0}")]
    ScriptMiss(String),
    #[error("{0}")]
    Fatal(String),
}

/// One-shot completion transport. Retry, backoff, and verdict parsing live
/// above this trait in [`crate::judge::Judge`].
pub trait JudgeBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;

    /// Model identifier recorded in run manifests and persistence keys.
    fn identifier(&self) -> String;
}

/// Stable key for a rendered prompt: first 16 hex chars of its SHA-256.
pub fn prompt_key(prompt: &str) -> String {
    short_hash(prompt)
}

// ── Mock backend ───────────────────────────────────────────────────────

/// Deterministic mock: a pure function of (prompt hash, script). Script
/// files are line-delimited `prompt_hash<TAB>response_file` with paths
/// resolved relative to the script's directory.
pub struct MockBackend {
    responses: HashMap<String, String>,
}

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script line {line}: expected prompt_hash<TAB>response_file")]
    MalformedLine { line: usize },
}

impl MockBackend {
    pub fn from_script(path: impl AsRef<Path>) -> Result<Self, MockScriptError> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|source| MockScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut responses = HashMap::new();
        for (idx, line) in raw.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (hash, file) = trimmed
                .split_once('\t')
                .ok_or(MockScriptError::MalformedLine { line: idx + 1 })?;
            let response_path = base.join(file.trim());
            let body =
                std::fs::read_to_string(&response_path).map_err(|source| MockScriptError::Io {
                    path: response_path.display().to_string(),
                    source,
                })?;
            responses.insert(hash.trim().to_string(), body);
        }
        Ok(Self { responses })
    }

    /// Build directly from (prompt, response) pairs; prompts are hashed.
    pub fn from_pairs<I, P, R>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (P, R)>,
        P: AsRef<str>,
        R: Into<String>,
    {
        let responses = pairs
            .into_iter()
            .map(|(prompt, response)| (prompt_key(prompt.as_ref()), response.into()))
            .collect();
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl JudgeBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let key = prompt_key(prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or(BackendError::ScriptMiss(key))
    }

    fn identifier(&self) -> String {
        "mock".to_string()
    }
}

/// Write a mock script plus its response files under `dir`. Returns the
/// script path, ready for `MockBackend::from_script` or `--mock`.
pub fn write_mock_script(
    dir: impl AsRef<Path>,
    pairs: &[(String, String)],
) -> std::io::Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let script_path = dir.join("script.tsv");
    let mut script = std::fs::File::create(&script_path)?;
    for (prompt, response) in pairs {
        let key = prompt_key(prompt);
        let file = format!("resp-{key}.txt");
        std::fs::write(dir.join(&file), response)?;
        writeln!(script, "{key}\t{file}")?;
    }
    Ok(script_path)
}

// ── HTTP backend ───────────────────────────────────────────────────────

/// Configuration for the OpenAI-compatible chat-completions backend.
#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            model: "gpt-4o".to_string(),
            temperature: 0.0,
            timeout_secs: 120,
            api_key_env: "OPENAI_API_KEY".to_string(),
        }
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            BackendError::Auth(format!(
                "API key environment variable {} is not set",
                config.api_key_env
            ))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Fatal(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            config,
            api_key,
            client,
        })
    }
}

impl JudgeBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() || e.is_request() {
                    BackendError::Transient(e.to_string())
                } else {
                    BackendError::Fatal(e.to_string())
                }
            })?;

        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transient(format!("reading body: {e}")))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("HTTP {status}: {text}")));
        }
        if status.as_u16() == 408 || status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {text}")));
        }

        let parsed: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Fatal(format!("malformed completion response: {e}")))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::Fatal("completion response has no message content".to_string())
            })
    }

    fn identifier(&self) -> String {
        self.config.model.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_returns_scripted_text_for_exact_prompt() {
        let backend = MockBackend::from_pairs([("hello world", "scripted")]);
        assert_eq!(backend.complete("hello world").unwrap(), "scripted");
        assert!(matches!(
            backend.complete("other prompt"),
            Err(BackendError::ScriptMiss(_))
        ));
    }

    #[test]
    fn script_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![
            ("prompt one".to_string(), "response one".to_string()),
            ("prompt two".to_string(), "response two".to_string()),
        ];
        let script = write_mock_script(dir.path(), &pairs).unwrap();
        let backend = MockBackend::from_script(&script).unwrap();
        assert_eq!(backend.complete("prompt one").unwrap(), "response one");
        assert_eq!(backend.complete("prompt two").unwrap(), "response two");
    }

    #[test]
    fn malformed_script_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("script.tsv");
        std::fs::write(&script, "not a tab separated line\n").unwrap();
        assert!(matches!(
            MockBackend::from_script(&script),
            Err(MockScriptError::MalformedLine { line: 1 })
        ));
    }

    #[test]
    fn http_backend_requires_key_env() {
        let config = HttpBackendConfig {
            api_key_env: "REPORTEVAL_TEST_MISSING_KEY".to_string(),
            ..HttpBackendConfig::default()
        };
        match HttpBackend::new(config) {
            Err(BackendError::Auth(message)) => {
                assert!(message.contains("REPORTEVAL_TEST_MISSING_KEY"))
            }
            other => panic!("expected auth error, got {:?}", other.map(|_| ())),
        }
    }

    /// Loopback server returning a scripted response per connection.
    fn serve_sequence(responses: Vec<(&'static str, String)>) -> String {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            for (status_line, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut buf = [0u8; 8192];
                let _ = stream.read(&mut buf);
                let response = format!(
                    "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}/v1/chat/completions")
    }

    #[test]
    fn http_429_twice_then_success_yields_three_attempts() {
        let completion = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": "scripted answer"}}]
        })
        .to_string();
        let endpoint = serve_sequence(vec![
            ("HTTP/1.1 429 Too Many Requests", "slow down".to_string()),
            ("HTTP/1.1 429 Too Many Requests", "slow down".to_string()),
            ("HTTP/1.1 200 OK", completion),
        ]);

        std::env::set_var("REPORTEVAL_TEST_429_KEY", "test-key");
        let backend = HttpBackend::new(HttpBackendConfig {
            endpoint,
            api_key_env: "REPORTEVAL_TEST_429_KEY".to_string(),
            timeout_secs: 10,
            ..HttpBackendConfig::default()
        })
        .unwrap();

        let judge = crate::judge::Judge::new(
            std::sync::Arc::new(backend),
            crate::judge::JudgeOptions {
                max_retries: 3,
                initial_backoff_ms: 0,
                max_backoff_ms: 0,
                concurrency: 1,
            },
        );
        let invocation = judge.invoke("ping").unwrap();
        assert_eq!(invocation.text, "scripted answer");
        assert_eq!(invocation.attempts, 3);
    }

    #[test]
    fn http_401_maps_to_auth_failure() {
        let endpoint = serve_sequence(vec![(
            "HTTP/1.1 401 Unauthorized",
            "{\"error\": \"bad key\"}".to_string(),
        )]);
        std::env::set_var("REPORTEVAL_TEST_401_KEY", "test-key");
        let backend = HttpBackend::new(HttpBackendConfig {
            endpoint,
            api_key_env: "REPORTEVAL_TEST_401_KEY".to_string(),
            timeout_secs: 10,
            ..HttpBackendConfig::default()
        })
        .unwrap();
        assert!(matches!(
            backend.complete("ping"),
            Err(BackendError::Auth(_))
        ));
    }
}
