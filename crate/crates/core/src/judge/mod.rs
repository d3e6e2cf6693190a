//! Judge orchestration: render a template, invoke a backend with bounded
//! retry, and validate the response against a verdict schema.
//!
//! Transport failures retry with exponential backoff up to `max_retries`.
//! A response that fails schema validation earns exactly one re-invocation;
//! a second failure surfaces as [`JudgeError::InvalidVerdict`] so callers
//! can exclude the item from aggregation instead of imputing a score.

mod backend;
mod template;
mod verdict;

pub use backend::{
    prompt_key, write_mock_script, BackendError, HttpBackend, HttpBackendConfig, JudgeBackend,
    MockBackend, MockScriptError,
};
pub use template::{bindings, PromptTemplate, Rendered, TemplateError, TemplateKind, TemplateSet};
pub use verdict::{
    parse_verdict, CategoryPayload, FactualityPayload, JudgeVerdict, ParseRejected, QualityPayload,
    RedundancyPayload, VerdictPayload, VerdictSchema,
};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

use crate::util::Semaphore;

#[derive(Debug, Clone)]
pub struct JudgeOptions {
    /// Transport retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// In-flight request limit across all threads.
    pub concurrency: usize,
}

impl Default for JudgeOptions {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
            concurrency: 4,
        }
    }
}

impl JudgeOptions {
    /// No backoff sleeps; used by tests and the mock path.
    pub fn immediate() -> Self {
        Self {
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
            ..Self::default()
        }
    }
}

/// One successful backend completion.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub text: String,
    /// Transport attempts consumed, including the successful one.
    pub attempts: u32,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("invalid verdict after retry: {reason}")]
    InvalidVerdict { reason: String, raw: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl JudgeError {
    /// True when the item should be excluded from aggregation rather than
    /// aborting the run.
    pub fn is_invalid_verdict(&self) -> bool {
        matches!(self, JudgeError::InvalidVerdict { .. })
    }
}

pub struct Judge {
    backend: Arc<dyn JudgeBackend>,
    options: JudgeOptions,
    limiter: Semaphore,
}

impl Judge {
    pub fn new(backend: Arc<dyn JudgeBackend>, options: JudgeOptions) -> Self {
        let limiter = Semaphore::new(options.concurrency);
        Self {
            backend,
            options,
            limiter,
        }
    }

    /// Model identifier recorded in manifests and persistence keys.
    pub fn model_identifier(&self) -> String {
        self.backend.identifier()
    }

    /// One completion with bounded retry on transient transport failures.
    pub fn invoke(&self, prompt: &str) -> Result<Invocation, JudgeError> {
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.backend.complete(prompt)
            };
            match result {
                Ok(text) => return Ok(Invocation { text, attempts }),
                Err(BackendError::Transient(message)) => {
                    if attempts > self.options.max_retries {
                        return Err(JudgeError::Transport { attempts, message });
                    }
                    self.backoff(attempts);
                }
                Err(BackendError::Auth(message)) => return Err(JudgeError::Auth(message)),
                Err(other) => return Err(JudgeError::Backend(other.to_string())),
            }
        }
    }

    fn backoff(&self, attempt: u32) {
        if self.options.initial_backoff_ms == 0 {
            return;
        }
        let factor = 1u64 << (attempt - 1).min(16);
        let delay = self.options.initial_backoff_ms.saturating_mul(factor).min(
            self.options
                .max_backoff_ms
                .max(self.options.initial_backoff_ms),
        );
        std::thread::sleep(Duration::from_millis(delay));
    }

    /// Invoke and validate. A schema-invalid response is re-invoked once;
    /// a second rejection is an [`JudgeError::InvalidVerdict`].
    pub fn judge(&self, prompt: &str, schema: VerdictSchema) -> Result<JudgeVerdict, JudgeError> {
        let first = self.invoke(prompt)?;
        match parse_verdict(&first.text, schema) {
            Ok(mut verdict) => {
                verdict.attempts = first.attempts;
                Ok(verdict)
            }
            Err(first_reject) => {
                let second = self.invoke(prompt)?;
                match parse_verdict(&second.text, schema) {
                    Ok(mut verdict) => {
                        verdict.attempts = first.attempts + second.attempts;
                        Ok(verdict)
                    }
                    Err(second_reject) => Err(JudgeError::InvalidVerdict {
                        reason: format!("{first_reject}; retry: {second_reject}"),
                        raw: second.text,
                    }),
                }
            }
        }
    }

    /// Render `template` with `bindings`, then [`Self::judge`] the result.
    pub fn render_and_judge(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        schema: VerdictSchema,
    ) -> Result<JudgeVerdict, JudgeError> {
        let rendered = template.render(bindings)?;
        self.judge(&rendered.text, schema)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    /// Backend that fails with transient errors a fixed number of times
    /// before succeeding, counting every call.
    struct FlakyBackend {
        failures: u32,
        calls: AtomicU32,
        response: String,
    }

    impl JudgeBackend for FlakyBackend {
        fn complete(&self, _prompt: &str) -> Result<String, BackendError> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
            if call <= self.failures {
                Err(BackendError::Transient("HTTP 429".to_string()))
            } else {
                Ok(self.response.clone())
            }
        }

        fn identifier(&self) -> String {
            "flaky".to_string()
        }
    }

    struct AlwaysInvalid {
        calls: AtomicU32,
    }

    impl JudgeBackend for AlwaysInvalid {
        fn complete(&self, _prompt: &str) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok("no json here, just prose".to_string())
        }

        fn identifier(&self) -> String {
            "invalid".to_string()
        }
    }

    #[test]
    fn transient_failures_retry_until_success() {
        let backend = Arc::new(FlakyBackend {
            failures: 2,
            calls: AtomicU32::new(0),
            response: r#"{"is_factual": 1, "sentence_support": "s"}"#.to_string(),
        });
        let judge = Judge::new(backend.clone(), JudgeOptions::immediate());
        let verdict = judge.judge("p", VerdictSchema::Factuality).unwrap();
        assert_eq!(verdict.attempts, 3);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn transport_error_after_max_retries() {
        let backend = Arc::new(FlakyBackend {
            failures: 10,
            calls: AtomicU32::new(0),
            response: String::new(),
        });
        let options = JudgeOptions {
            max_retries: 2,
            ..JudgeOptions::immediate()
        };
        let judge = Judge::new(backend.clone(), options);
        match judge.invoke("p") {
            Err(JudgeError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected transport error, got {other:?}"),
        }
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn invalid_verdict_gets_exactly_one_retry() {
        let backend = Arc::new(AlwaysInvalid {
            calls: AtomicU32::new(0),
        });
        let judge = Judge::new(backend.clone(), JudgeOptions::immediate());
        match judge.judge("p", VerdictSchema::Redundancy) {
            Err(JudgeError::InvalidVerdict { .. }) => {}
            other => panic!("expected invalid verdict, got {other:?}"),
        }
        assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn mock_judging_is_reproducible() {
        let response = r#"{"score": 4, "explanation": "independent", "repetitions_found": [], "confidence": "100%"}"#;
        let backend = Arc::new(MockBackend::from_pairs([("prompt-a", response)]));
        let judge = Judge::new(backend, JudgeOptions::immediate());
        let a = judge.judge("prompt-a", VerdictSchema::Redundancy).unwrap();
        let b = judge.judge("prompt-a", VerdictSchema::Redundancy).unwrap();
        assert_eq!(a, b);
    }
}
