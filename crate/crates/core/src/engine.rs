//! A loaded corpus with its indexes and model clients, answering search
//! and ask requests with serializable responses.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Corpus, IngestConfig};
use crate::dense::{DenseIndex, EmbeddingProvider, HnswParams, ProviderSpec, SearchMode};
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::fusion::{FusionConfig, FusionStrategy};
use crate::lexical::Bm25Index;
use crate::rag::{answer_pipeline, AnswerStatus, LlmClient, LlmSpec, PipelineConfig};
use crate::search::{Indexes, Retriever};

/// Where the built artifacts live and which providers to use with them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub corpus_dir: PathBuf,
    pub lexical_dir: PathBuf,
    pub dense_dir: PathBuf,
    /// Query embedder; defaults to the one recorded in the dense index.
    #[serde(default)]
    pub embedder: Option<ProviderSpec>,
    #[serde(default)]
    pub llm: LlmSpec,
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Lexical,
    Dense,
    /// Weighted min-max fusion.
    #[default]
    #[serde(alias = "minmax")]
    Hybrid,
    /// Reciprocal rank fusion.
    Rrf,
}

impl std::str::FromStr for SearchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical" => Ok(Self::Lexical),
            "dense" => Ok(Self::Dense),
            "hybrid" | "minmax" => Ok(Self::Hybrid),
            "rrf" => Ok(Self::Rrf),
            other => Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkEvidence {
    pub chunk_id: String,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleHit {
    pub article_id: String,
    pub title: String,
    pub score: f64,
    /// Retrieved chunks of this article, best first.
    pub chunks: Vec<ChunkEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query: String,
    pub strategy: SearchStrategy,
    pub articles: Vec<ArticleHit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub chunk_id: String,
    pub article_id: String,
    pub score: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub query: String,
    pub answer: String,
    pub status: AnswerStatus,
    pub references: Vec<Reference>,
    pub supporting_article_ids: Vec<String>,
    pub llm_calls_used: usize,
    pub active_retrieval_engaged: bool,
    pub search_query: String,
    pub rewrite_degraded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub articles: usize,
    /// Includes the sentinel chunk.
    pub chunks: usize,
}

pub struct Engine {
    corpus: Corpus,
    lexical: Bm25Index,
    dense: DenseIndex,
    embedder: Arc<dyn EmbeddingProvider>,
    llm: Arc<dyn LlmClient>,
    pipeline: PipelineConfig,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("stats", &self.stats())
            .field("pipeline", &self.pipeline)
            .finish_non_exhaustive()
    }
}

impl Engine {
    pub fn new(
        corpus: Corpus,
        lexical: Bm25Index,
        dense: DenseIndex,
        embedder: Arc<dyn EmbeddingProvider>,
        llm: Arc<dyn LlmClient>,
        pipeline: PipelineConfig,
    ) -> Result<Self> {
        pipeline.validate()?;
        let engine = Self {
            corpus,
            lexical,
            dense,
            embedder,
            llm,
            pipeline,
        };
        engine.indexes().check()?;
        if engine.lexical.doc_count() != engine.corpus.chunks().len() || engine.dense.len() != engine.corpus.chunks().len() {
            return Err(Error::Config("indexes were built from a different corpus".into()));
        }
        Ok(engine)
    }

    pub fn open(config: &EngineConfig) -> Result<Self> {
        let corpus = Corpus::load(&config.corpus_dir)?;
        let lexical = Bm25Index::load(&config.lexical_dir)?;
        let dense = DenseIndex::load(&config.dense_dir)?;
        let embedder = match &config.embedder {
            Some(spec) => spec.instantiate()?,
            None => dense.provider()?,
        };
        Self::new(corpus, lexical, dense, embedder, config.llm.instantiate()?, config.pipeline)
    }

    /// Ingests and indexes in memory.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        articles: Vec<Article>,
        ingest: IngestConfig,
        embedder: Arc<dyn EmbeddingProvider>,
        mode: SearchMode,
        hnsw: HnswParams,
        llm: Arc<dyn LlmClient>,
        pipeline: PipelineConfig,
        parallelism: Parallelism,
    ) -> Result<Self> {
        let corpus = Corpus::build(articles, ingest, parallelism)?;
        let lexical = Bm25Index::build(corpus.chunks())?;
        let dense = DenseIndex::build(corpus.chunks(), embedder.as_ref(), mode, hnsw, parallelism)?;
        Self::new(corpus, lexical, dense, embedder, llm, pipeline)
    }

    pub fn save(&self, corpus_dir: &Path, lexical_dir: &Path, dense_dir: &Path) -> Result<()> {
        self.corpus.save(corpus_dir)?;
        self.lexical.save(lexical_dir)?;
        self.dense.save(dense_dir)
    }

    pub fn indexes(&self) -> Indexes<'_> {
        Indexes {
            corpus: &self.corpus,
            lexical: &self.lexical,
            dense: &self.dense,
            embedder: self.embedder.as_ref(),
        }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn pipeline_config(&self) -> &PipelineConfig {
        &self.pipeline
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            articles: self.corpus.articles().len(),
            chunks: self.corpus.chunks().len(),
        }
    }

    /// Top-`k` articles, each with the retrieved chunks behind it.
    pub fn search(&self, query: &str, k: usize, strategy: SearchStrategy) -> Result<SearchResponse> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let ix = self.indexes();
        let depth = k.max(self.pipeline.search_k);
        let (retriever, fusion) = match strategy {
            SearchStrategy::Lexical => (Retriever::Lexical, self.pipeline.fusion),
            SearchStrategy::Dense => (Retriever::Dense, self.pipeline.fusion),
            SearchStrategy::Hybrid => (
                Retriever::Hybrid,
                FusionConfig {
                    strategy: FusionStrategy::MinmaxWeighted,
                    ..self.pipeline.fusion
                },
            ),
            SearchStrategy::Rrf => (
                Retriever::Hybrid,
                FusionConfig {
                    strategy: FusionStrategy::Rrf,
                    ..self.pipeline.fusion
                },
            ),
        };
        let chunks = ix.retrieve(retriever, query, depth, &fusion, self.pipeline.long_query)?;
        let ranked = ix.to_articles(&chunks)?;
        let mut articles: Vec<ArticleHit> = ranked
            .hits()
            .iter()
            .take(k)
            .map(|h| ArticleHit {
                article_id: h.id.clone(),
                title: self.corpus.article(&h.id).map(|a| a.title.clone()).unwrap_or_default(),
                score: h.score,
                chunks: Vec::new(),
            })
            .collect();
        for c in &chunks {
            let Some(chunk) = self.corpus.chunk(&c.id) else { continue };
            if let Some(a) = articles.iter_mut().find(|a| a.article_id == chunk.article_id) {
                a.chunks.push(ChunkEvidence {
                    chunk_id: c.id.clone(),
                    score: c.score,
                    text: chunk.text.clone(),
                });
            }
        }
        Ok(SearchResponse {
            query: query.to_owned(),
            strategy,
            articles,
        })
    }

    /// Full answer pipeline with the configured LLM.
    pub fn ask(&self, query: &str) -> Result<AskResponse> {
        self.ask_with(self.llm.as_ref(), query)
    }

    pub fn ask_with(&self, llm: &dyn LlmClient, query: &str) -> Result<AskResponse> {
        let out = answer_pipeline(llm, &self.indexes(), query, &self.pipeline)?;
        let references = out
            .references
            .hits()
            .iter()
            .filter_map(|h| {
                let c = self.corpus.chunk(&h.id)?;
                Some(Reference {
                    chunk_id: h.id.clone(),
                    article_id: c.article_id.clone(),
                    score: h.score,
                    text: c.text.clone(),
                })
            })
            .collect();
        Ok(AskResponse {
            query: query.to_owned(),
            answer: out.answer.answer_text,
            status: out.answer.status,
            references,
            supporting_article_ids: out.answer.supporting_article_ids,
            llm_calls_used: out.answer.llm_calls_used,
            active_retrieval_engaged: out.answer.active_retrieval_engaged,
            search_query: out.search_query,
            rewrite_degraded: out.rewrite_degraded,
        })
    }
}
