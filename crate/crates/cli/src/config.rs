//! Run configuration: TOML file, `REPORTEVAL_*` environment variables, and
//! command-line flags, merged with precedence flags > env > file.

use anyhow::{Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use reporteval_core::benchmark::EvalOptions;
use reporteval_core::judge::{
    HttpBackendConfig, JudgeOptions, PromptTemplate, TemplateKind, TemplateSet,
};
use reporteval_core::segment::SegmentOptions;
use reporteval_core::sources::FetchPolicy;

pub const DEFAULT_CONFIG_FILE: &str = "reporteval.toml";

/// Errors that indicate a misused invocation rather than a runtime failure;
/// they map to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub judge: JudgeSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub fetch: FetchSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub templates: TemplatesSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub concurrency: usize,
    pub api_key_env: String,
}

impl Default for JudgeSection {
    fn default() -> Self {
        let http = HttpBackendConfig::default();
        let judge = JudgeOptions::default();
        Self {
            endpoint: http.endpoint,
            model: http.model,
            temperature: http.temperature,
            timeout_secs: http.timeout_secs,
            max_retries: judge.max_retries,
            initial_backoff_ms: judge.initial_backoff_ms,
            concurrency: judge.concurrency,
            api_key_env: http.api_key_env,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub seed: u64,
    pub pair_cap: usize,
    pub min_paragraph_tokens: usize,
    pub quality_token_budget: usize,
    pub source_token_budget: usize,
    pub claim_pair_budget: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let options = EvalOptions::default();
        Self {
            seed: options.seed,
            pair_cap: options.pair_cap,
            min_paragraph_tokens: options.segment.min_tokens,
            quality_token_budget: options.quality_token_budget,
            source_token_budget: options.source_token_budget,
            claim_pair_budget: options.claim_pair_budget,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchSection {
    pub offline: bool,
    pub timeout_secs: u64,
    pub max_redirects: usize,
    pub per_host_delay_ms: u64,
    pub concurrency: usize,
}

impl Default for FetchSection {
    fn default() -> Self {
        let policy = FetchPolicy::default();
        Self {
            offline: policy.offline,
            timeout_secs: policy.timeout_secs,
            max_redirects: policy.max_redirects,
            per_host_delay_ms: policy.per_host_delay_ms,
            concurrency: policy.concurrency,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub queries: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub runs: Option<PathBuf>,
}

/// Optional template override files, one per kind.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatesSection {
    pub quality: Option<PathBuf>,
    pub redundancy: Option<PathBuf>,
    pub factuality: Option<PathBuf>,
    pub category: Option<PathBuf>,
}

impl FileConfig {
    /// Load the named file, or `reporteval.toml` in the working directory
    /// when present, or defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(path) => Some(path.to_path_buf()),
            None => {
                let default = PathBuf::from(DEFAULT_CONFIG_FILE);
                default.exists().then_some(default)
            }
        };
        let mut config = match path {
            None => Self::default(),
            Some(path) => {
                let raw = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read config {}", path.display()))
                    .map_err(usage)?;
                toml::from_str(&raw)
                    .with_context(|| format!("cannot parse config {}", path.display()))
                    .map_err(usage)?
            }
        };
        config.apply_env()?;
        Ok(config)
    }

    /// `REPORTEVAL_*` overrides, applied after the file and before flags.
    fn apply_env(&mut self) -> Result<()> {
        if let Some(v) = env_var("REPORTEVAL_ENDPOINT") {
            self.judge.endpoint = v;
        }
        if let Some(v) = env_var("REPORTEVAL_MODEL") {
            self.judge.model = v;
        }
        if let Some(v) = env_var("REPORTEVAL_API_KEY_ENV") {
            self.judge.api_key_env = v;
        }
        if let Some(v) = env_var("REPORTEVAL_SEED") {
            self.eval.seed = parse_env("REPORTEVAL_SEED", &v)?;
        }
        if let Some(v) = env_var("REPORTEVAL_PAIR_CAP") {
            self.eval.pair_cap = parse_env("REPORTEVAL_PAIR_CAP", &v)?;
        }
        if let Some(v) = env_var("REPORTEVAL_CONCURRENCY") {
            self.judge.concurrency = parse_env("REPORTEVAL_CONCURRENCY", &v)?;
        }
        if let Some(v) = env_var("REPORTEVAL_MAX_RETRIES") {
            self.judge.max_retries = parse_env("REPORTEVAL_MAX_RETRIES", &v)?;
        }
        if let Some(v) = env_var("REPORTEVAL_TIMEOUT_SECS") {
            self.judge.timeout_secs = parse_env("REPORTEVAL_TIMEOUT_SECS", &v)?;
        }
        if let Some(v) = env_var("REPORTEVAL_OFFLINE") {
            self.fetch.offline = matches!(v.as_str(), "1" | "true" | "yes");
        }
        if let Some(v) = env_var("REPORTEVAL_CACHE") {
            self.paths.cache = Some(PathBuf::from(v));
        }
        if let Some(v) = env_var("REPORTEVAL_RUNS") {
            self.paths.runs = Some(PathBuf::from(v));
        }
        Ok(())
    }

    pub fn judge_options(&self) -> JudgeOptions {
        JudgeOptions {
            max_retries: self.judge.max_retries,
            initial_backoff_ms: self.judge.initial_backoff_ms,
            max_backoff_ms: JudgeOptions::default().max_backoff_ms,
            concurrency: self.judge.concurrency,
        }
    }

    pub fn http_backend_config(&self) -> HttpBackendConfig {
        HttpBackendConfig {
            endpoint: self.judge.endpoint.clone(),
            model: self.judge.model.clone(),
            temperature: self.judge.temperature,
            timeout_secs: self.judge.timeout_secs,
            api_key_env: self.judge.api_key_env.clone(),
        }
    }

    pub fn fetch_policy(&self, offline_flag: bool) -> FetchPolicy {
        FetchPolicy {
            offline: self.fetch.offline || offline_flag,
            timeout_secs: self.fetch.timeout_secs,
            max_redirects: self.fetch.max_redirects,
            per_host_delay_ms: self.fetch.per_host_delay_ms,
            concurrency: self.fetch.concurrency,
            ..FetchPolicy::default()
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            seed: self.eval.seed,
            pair_cap: self.eval.pair_cap,
            segment: SegmentOptions {
                min_tokens: self.eval.min_paragraph_tokens,
            },
            quality_token_budget: self.eval.quality_token_budget,
            source_token_budget: self.eval.source_token_budget,
            claim_pair_budget: self.eval.claim_pair_budget,
            stop_after: None,
        }
    }

    /// Build the template set, applying file overrides from config and then
    /// per-flag overrides.
    pub fn templates(&self, flag_overrides: &[(TemplateKind, PathBuf)]) -> Result<TemplateSet> {
        let mut set = TemplateSet::default();
        let config_overrides = [
            (TemplateKind::Quality, &self.templates.quality),
            (TemplateKind::Redundancy, &self.templates.redundancy),
            (TemplateKind::Factuality, &self.templates.factuality),
            (TemplateKind::Category, &self.templates.category),
        ];
        for (kind, path) in config_overrides {
            if let Some(path) = path {
                set.set(load_template(kind, path)?);
            }
        }
        for (kind, path) in flag_overrides {
            set.set(load_template(*kind, path)?);
        }
        Ok(set)
    }
}

fn load_template(kind: TemplateKind, path: &Path) -> Result<PromptTemplate> {
    PromptTemplate::from_file(kind, path)
        .with_context(|| format!("cannot load {kind} template"))
        .map_err(usage)
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        UsageError(format!(
            "environment variable {name} has invalid value {value:?}"
        ))
        .into()
    })
}

/// Tag an error as a usage problem (exit code 2).
pub fn usage(err: anyhow::Error) -> anyhow::Error {
    match err.downcast_ref::<UsageError>() {
        Some(_) => err,
        None => UsageError(format!("{err:#}")).into(),
    }
}

pub fn usage_msg(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
