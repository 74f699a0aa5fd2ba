//! LLM clients: a text-completion contract plus deterministic mocks and a
//! blocking HTTP client.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
#[cfg(feature = "http")]
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ProviderError, Result};
use crate::jsonl;

use super::prompt;

/// Text in, text out. Implementations must tolerate concurrent calls.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

impl<F> LlmClient for F
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self(prompt)
    }
}

/// Hex SHA-256 of a prompt, used as the key in scripted responses.
pub fn prompt_fingerprint(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Returns the question at the end of any prompt built by this crate. On an
/// answer prompt that text is not JSON, so every batch reads as a refusal.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoLlm;

impl LlmClient for EchoLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        Ok(prompt::question_of(prompt).unwrap_or(prompt).to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedFailure {
    Timeout,
    Unavailable,
}

/// One scripted reply: literal text, or a simulated transport failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Text(String),
    Fail { error: ScriptedFailure },
}

impl ScriptedReply {
    fn resolve(&self) -> Result<String, ProviderError> {
        match self {
            ScriptedReply::Text(t) => Ok(t.clone()),
            ScriptedReply::Fail { error: ScriptedFailure::Timeout } => {
                Err(ProviderError::Timeout("scripted timeout".into()))
            }
            ScriptedReply::Fail { error: ScriptedFailure::Unavailable } => {
                Err(ProviderError::Unavailable("scripted outage".into()))
            }
        }
    }
}

/// Response script file contents.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Script {
    /// Keyed by [`prompt_fingerprint`]; checked first.
    pub by_fingerprint: HashMap<String, ScriptedReply>,
    /// Indexed by 0-based call ordinal.
    pub by_ordinal: Vec<ScriptedReply>,
    /// Used when neither table matches. Without one, unmatched calls fail.
    pub fallback: Option<ScriptedReply>,
}

/// Deterministic responder driven by a [`Script`].
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    script: Script,
    calls: AtomicUsize,
}

impl ScriptedLlm {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_ordinals<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::new(Script {
            by_ordinal: replies.into_iter().map(|r| ScriptedReply::Text(r.into())).collect(),
            ..Script::default()
        })
    }

    pub fn with_fallback(mut self, reply: impl Into<String>) -> Self {
        self.script.fallback = Some(ScriptedReply::Text(reply.into()));
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::new(jsonl::read_json(path)?))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for ScriptedLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let ordinal = self.calls.fetch_add(1, Ordering::SeqCst);
        let reply = self
            .script
            .by_fingerprint
            .get(&prompt_fingerprint(prompt))
            .or_else(|| self.script.by_ordinal.get(ordinal))
            .or(self.script.fallback.as_ref())
            .ok_or_else(|| ProviderError::BadResponse(format!("script has no reply for call {ordinal}")))?;
        reply.resolve()
    }
}

/// Remote completion endpoint speaking
/// `POST {model, prompt, max_tokens, temperature: 0}` → `{text}`.
#[cfg(feature = "http")]
#[derive(Debug)]
pub struct HttpLlm {
    endpoint: String,
    model: String,
    max_tokens: u32,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpLlm {
    pub fn new(endpoint: String, model: String, max_tokens: u32, timeout: Duration, max_retries: u32, backoff: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint,
            model,
            max_tokens,
            timeout,
            max_retries,
            backoff,
            agent,
        }
    }

    fn post_once(&self, prompt: &str) -> Result<String, ProviderError> {
        #[derive(Deserialize)]
        struct Reply {
            text: String,
        }
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "max_tokens": self.max_tokens,
            "temperature": 0,
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| crate::http::classify(&e, self.timeout))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(ProviderError::Unavailable(format!("{} returned {status}", self.endpoint)));
        }
        if status >= 400 {
            return Err(ProviderError::BadResponse(format!("{} returned {status}", self.endpoint)));
        }
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        Ok(reply.text)
    }
}

#[cfg(feature = "http")]
impl LlmClient for HttpLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        crate::http::with_retries(self.max_retries, self.backoff, || self.post_once(prompt))
    }
}

/// Serializable LLM configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LlmSpec {
    #[default]
    Echo,
    Scripted {
        script: std::path::PathBuf,
    },
    Http {
        endpoint: String,
        #[serde(default)]
        model: String,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
    },
}

fn default_max_tokens() -> u32 {
    512
}
fn default_timeout_ms() -> u64 {
    60_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    500
}

impl LlmSpec {
    pub fn instantiate(&self) -> Result<Arc<dyn LlmClient>> {
        match self {
            LlmSpec::Echo => Ok(Arc::new(EchoLlm)),
            LlmSpec::Scripted { script } => Ok(Arc::new(ScriptedLlm::load(script)?)),
            #[cfg(feature = "http")]
            LlmSpec::Http {
                endpoint,
                model,
                max_tokens,
                timeout_ms,
                max_retries,
                backoff_ms,
            } => Ok(Arc::new(HttpLlm::new(
                endpoint.clone(),
                model.clone(),
                *max_tokens,
                Duration::from_millis(*timeout_ms),
                *max_retries,
                Duration::from_millis(*backoff_ms),
            ))),
            #[cfg(not(feature = "http"))]
            LlmSpec::Http { .. } => Err(crate::error::Error::Config("HTTP LLM client requires the `http` feature".into())),
        }
    }
}
