//! Service configuration: a TOML file, then `HYBRIDQA_*` environment
//! overrides, then validation.
//!
//! An override variable names a dotted field path with `__` between
//! segments, e.g. `HYBRIDQA_PIPELINE__BATCH_SIZE=4` or
//! `HYBRIDQA_LLM__ENDPOINT=http://...`. Values are read as TOML literals
//! and fall back to plain strings.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hybridqa_core::corpus::{load_articles, IngestConfig};
use hybridqa_core::dense::{HnswParams, ProviderSpec, SearchMode};
use hybridqa_core::engine::{Engine, EngineConfig};
use hybridqa_core::rag::{LlmSpec, PipelineConfig};
use hybridqa_core::Parallelism;

pub const ENV_PREFIX: &str = "HYBRIDQA_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Field {
        field: field.to_owned(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub lexical: PathBuf,
    pub dense: PathBuf,
}

/// Raw material for `/admin/reindex` to rebuild from. Without it, reindex
/// reloads whatever is in the index directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub articles: PathBuf,
    #[serde(default)]
    pub ingest: IngestConfig,
    #[serde(default)]
    pub dense_mode: SearchMode,
    #[serde(default)]
    pub hnsw: HnswParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    #[serde(default = "default_timeout_ms")]
    pub request_timeout_ms: u64,
    pub paths: Paths,
    #[serde(default)]
    pub source: Option<Source>,
    #[serde(default)]
    pub embedder: Option<ProviderSpec>,
    #[serde(default)]
    pub llm: LlmSpec,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_timeout_ms() -> u64 {
    30_000
}

impl ServiceConfig {
    /// Reads the file, applies environment overrides, resolves relative
    /// paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        if !path.is_file() {
            return Err(ConfigError::NotFound(path.to_owned()));
        }
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&raw, base, env)
    }

    pub fn from_toml_str(
        raw: &str,
        base: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = raw.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
            .collect();
        overrides.sort();
        for (key, value) in overrides {
            let segments: Vec<&str> = key.split("__").collect();
            set_path(&mut doc, &segments, parse_value(&value)).map_err(|m| field(&segments.join("."), m))?;
        }
        let mut cfg: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.corpus);
        fix(&mut self.paths.lexical);
        fix(&mut self.paths.dense);
        if let Some(s) = &mut self.source {
            fix(&mut s.articles);
        }
        if let LlmSpec::Scripted { script } = &mut self.llm {
            fix(script);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        if self.request_timeout_ms == 0 {
            return Err(field("request_timeout_ms", "must be positive"));
        }
        let p = &self.pipeline;
        if !(2..=5).contains(&p.batch_size) {
            return Err(field("pipeline.batch_size", "must be between 2 and 5"));
        }
        if p.primary_article_limit < p.batch_size {
            return Err(field("pipeline.primary_article_limit", "must be at least batch_size"));
        }
        if p.active_retrieval_chunk_cap < p.batch_size {
            return Err(field("pipeline.active_retrieval_chunk_cap", "must be at least batch_size"));
        }
        if p.search_k == 0 {
            return Err(field("pipeline.search_k", "must be at least 1"));
        }
        p.fusion.validate().map_err(|e| field("pipeline.fusion", e))?;
        if let Some(e) = &self.embedder {
            if e.dimension() == 0 {
                return Err(field("embedder.dimension", "must be positive"));
            }
        }
        if let LlmSpec::Http { endpoint, .. } = &self.llm {
            if endpoint.is_empty() {
                return Err(field("llm.endpoint", "must not be empty"));
            }
        }
        if let Some(s) = &self.source {
            s.ingest.chunking.validate().map_err(|e| field("source.ingest.chunking", e))?;
            s.hnsw.validate().map_err(|e| field("source.hnsw", e))?;
        }
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        self.listen.parse().map_err(|e| field("listen", e))
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            corpus_dir: self.paths.corpus.clone(),
            lexical_dir: self.paths.lexical.clone(),
            dense_dir: self.paths.dense.clone(),
            embedder: self.embedder.clone(),
            llm: self.llm.clone(),
            pipeline: self.pipeline,
        }
    }

    /// Loads the engine from the index directories, rebuilding them first
    /// from `source` when requested and configured.
    pub fn open_engine(&self, rebuild: bool) -> hybridqa_core::Result<Engine> {
        if let (true, Some(src)) = (rebuild, &self.source) {
            let embedder = self.embedder.clone().unwrap_or_default().instantiate()?;
            let engine = Engine::build(
                load_articles(&src.articles)?,
                src.ingest.clone(),
                embedder,
                src.dense_mode,
                src.hnsw,
                self.llm.instantiate()?,
                self.pipeline,
                Parallelism::Parallel,
            )?;
            engine.save(&self.paths.corpus, &self.paths.lexical, &self.paths.dense)?;
            return Ok(engine);
        }
        Engine::open(&self.engine_config())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn set_path(table: &mut toml::Table, path: &[&str], value: toml::Value) -> Result<(), String> {
    match path {
        [] => Err("empty override key".into()),
        [last] => {
            table.insert((*last).to_owned(), value);
            Ok(())
        }
        [head, rest @ ..] => {
            let entry = table
                .entry((*head).to_owned())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match entry {
                toml::Value::Table(t) => set_path(t, rest, value),
                _ => Err(format!("`{head}` is not a table")),
            }
        }
    }
}
