//! Embedding providers.

use std::fmt;
use std::sync::Arc;
#[cfg(feature = "http")]
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ProviderError, Result};
use crate::text::{normalize_text, term_key};

/// Bi-encoder contract: a deterministic map from text to a fixed-size vector.
pub trait EmbeddingProvider: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    /// Serializable description used to re-create the provider when an
    /// index is loaded.
    fn spec(&self) -> ProviderSpec;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Mock {
        dimension: usize,
    },
    Http {
        endpoint: String,
        dimension: usize,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
        #[serde(default = "default_backoff_ms")]
        backoff_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    10_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    200
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Mock {
            dimension: HashingEmbedder::DEFAULT_DIMENSION,
        }
    }
}

impl ProviderSpec {
    pub fn dimension(&self) -> usize {
        match self {
            ProviderSpec::Mock { dimension } | ProviderSpec::Http { dimension, .. } => *dimension,
        }
    }

    pub fn instantiate(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        match self {
            ProviderSpec::Mock { dimension } => Ok(Arc::new(HashingEmbedder::new(*dimension)?)),
            #[cfg(feature = "http")]
            ProviderSpec::Http {
                endpoint,
                dimension,
                timeout_ms,
                max_retries,
                backoff_ms,
            } => Ok(Arc::new(HttpEmbedder::new(
                endpoint.clone(),
                *dimension,
                Duration::from_millis(*timeout_ms),
                *max_retries,
                Duration::from_millis(*backoff_ms),
            )?)),
            #[cfg(not(feature = "http"))]
            ProviderSpec::Http { .. } => Err(Error::Config(
                "HTTP embedding provider requires the `http` feature".into(),
            )),
        }
    }
}

/// 64-bit FNV-1a, seeded by mixing `seed` into the offset basis.
fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Feature-hashing embedder: every token adds ±1 to one of `d` buckets,
/// then the vector is L2-normalized. Needs no model weights.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub const DEFAULT_DIMENSION: usize = 64;

    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { dimension })
    }

    /// Unnormalized bucket counts.
    pub fn raw_features(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in normalize_text(text).split_whitespace() {
            let key = term_key(token);
            if key.is_empty() {
                continue;
            }
            let bucket = (fnv1a(key.as_bytes(), 0) % self.dimension as u64) as usize;
            let sign = if fnv1a(key.as_bytes(), 1) & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dimension: Self::DEFAULT_DIMENSION,
        }
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let v = self.raw_features(text);
        match unit_f32(&v) {
            Some(u) => Ok(u),
            // Empty text (or fully cancelled features) maps to the first axis.
            None => {
                let mut e = vec![0.0; self.dimension];
                e[0] = 1.0;
                Ok(e)
            }
        }
    }

    fn spec(&self) -> ProviderSpec {
        ProviderSpec::Mock {
            dimension: self.dimension,
        }
    }
}

fn unit_f32(v: &[f64]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|x| (x / norm) as f32).collect())
}

/// L2-normalizes a vector, computing in f64.
pub fn unit_normalize(v: &[f32]) -> Result<Vec<f32>> {
    let wide: Vec<f64> = v.iter().map(|&x| f64::from(x)).collect();
    unit_f32(&wide).ok_or(Error::ZeroVector)
}

/// Embeds query text into a unit vector of the provider's dimension.
pub fn embed_query(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f32>> {
    let v = provider.embed(text)?;
    if v.len() != provider.dimension() {
        return Err(Error::DimensionMismatch {
            expected: provider.dimension(),
            actual: v.len(),
        });
    }
    unit_normalize(&v)
}

/// Remote embedder speaking `POST {texts: [..]}` → `{vectors: [[..]]}`.
#[cfg(feature = "http")]
#[derive(Debug)]
pub struct HttpEmbedder {
    endpoint: String,
    dimension: usize,
    timeout: Duration,
    max_retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpEmbedder {
    pub fn new(
        endpoint: String,
        dimension: usize,
        timeout: Duration,
        max_retries: u32,
        backoff: Duration,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            endpoint,
            dimension,
            timeout,
            max_retries,
            backoff,
            agent,
        })
    }

    fn post_once(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        #[derive(Deserialize)]
        struct Reply {
            vectors: Vec<Vec<f32>>,
        }
        let body = serde_json::json!({ "texts": texts });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| crate::http::classify(&e, self.timeout))?;
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(ProviderError::Unavailable(format!("{} returned {status}", self.endpoint)));
        }
        if status >= 400 {
            return Err(ProviderError::BadResponse(format!("{} returned {status}", self.endpoint)));
        }
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        if reply.vectors.len() != texts.len() {
            return Err(ProviderError::BadResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                reply.vectors.len()
            )));
        }
        Ok(reply.vectors)
    }
}

#[cfg(feature = "http")]
impl EmbeddingProvider for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, ProviderError> {
        crate::http::with_retries(self.max_retries, self.backoff, || self.post_once(texts))
    }

    fn spec(&self) -> ProviderSpec {
        ProviderSpec::Http {
            endpoint: self.endpoint.clone(),
            dimension: self.dimension,
            timeout_ms: self.timeout.as_millis() as u64,
            max_retries: self.max_retries,
            backoff_ms: self.backoff.as_millis() as u64,
        }
    }
}
