//! Retrieval-augmented answering: query rewriting, batched answer
//! generation with an Active Retrieval fallback, and answer-driven
//! re-ranking of the consulted chunks.

mod llm;
mod prompt;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use llm::{prompt_fingerprint, EchoLlm, LlmClient, LlmSpec, Script, ScriptedFailure, ScriptedLlm, ScriptedReply};
#[cfg(feature = "http")]
pub use llm::HttpLlm;
pub use prompt::{
    answer_prompt, parse_answer, parse_answer_prompt, question_of, rewrite_prompt, shown_article_ids, LlmAnswer,
    ShownArticle,
};

use crate::corpus::{Chunk, Corpus, SENTINEL_CHUNK_ID};
use crate::dense::embed_query;
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionConfig};
use crate::ranked::{RankedList, ScoredHit};
use crate::search::{Indexes, LongQuery, Retriever};
use crate::NO_ANSWER;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Articles per answer call, 2 to 5.
    pub batch_size: usize,
    pub primary_article_limit: usize,
    /// Chunk positions in the fused ranking that may be consumed overall.
    pub active_retrieval_chunk_cap: usize,
    pub rewrite_enabled: bool,
    /// Extra attempts after a reply that does not parse.
    pub max_parse_retries: u32,
    /// Depth of the fused chunk ranking fed to answering.
    pub search_k: usize,
    pub long_query: LongQuery,
    pub fusion: FusionConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batch_size: 3,
            primary_article_limit: 10,
            active_retrieval_chunk_cap: 50,
            rewrite_enabled: true,
            max_parse_retries: 1,
            search_k: 100,
            long_query: LongQuery::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.batch_size) {
            return Err(Error::Config(format!("batch_size must be between 2 and 5, got {}", self.batch_size)));
        }
        if self.primary_article_limit < self.batch_size {
            return Err(Error::Config("primary_article_limit must be at least batch_size".into()));
        }
        if self.active_retrieval_chunk_cap < self.batch_size {
            return Err(Error::Config("active_retrieval_chunk_cap must be at least batch_size".into()));
        }
        if self.search_k == 0 {
            return Err(Error::Config("search_k must be at least 1".into()));
        }
        self.fusion.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerStatus {
    Answered,
    NoAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerResult {
    pub status: AnswerStatus,
    pub answer_text: String,
    /// Cited ids, restricted to the articles shown in the answering call.
    pub supporting_article_ids: Vec<String>,
    /// Answer batches sent; parse retries and the rewrite call are not counted.
    pub llm_calls_used: usize,
    /// Every completion request, retries and rewriting included.
    pub llm_requests: usize,
    pub active_retrieval_engaged: bool,
    /// Every article shown to the model, in the order shown.
    pub consulted_article_ids: Vec<String>,
    /// Some batch was given up on because its replies never parsed.
    pub parse_failure: bool,
}

impl AnswerResult {
    pub fn no_answer() -> Self {
        Self {
            status: AnswerStatus::NoAnswer,
            answer_text: NO_ANSWER.to_owned(),
            supporting_article_ids: Vec::new(),
            llm_calls_used: 0,
            llm_requests: 0,
            active_retrieval_engaged: false,
            consulted_article_ids: Vec::new(),
            parse_failure: false,
        }
    }

    pub fn is_answered(&self) -> bool {
        self.status == AnswerStatus::Answered
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteOutcome {
    pub query: String,
    /// The client failed or returned nothing, so the raw query is used.
    pub degraded: bool,
}

/// Asks the model for a cleaner query. Never fails and never returns an
/// empty query.
pub fn rewrite_query(client: &dyn LlmClient, raw_query: &str) -> RewriteOutcome {
    match client.complete(&rewrite_prompt(raw_query)) {
        Ok(text) if !text.trim().is_empty() => RewriteOutcome {
            query: text.trim().to_owned(),
            degraded: false,
        },
        Ok(_) => {
            tracing::warn!("query rewrite returned nothing; using the raw query");
            RewriteOutcome {
                query: raw_query.to_owned(),
                degraded: true,
            }
        }
        Err(e) => {
            tracing::warn!(error = %e, "query rewrite failed; using the raw query");
            RewriteOutcome {
                query: raw_query.to_owned(),
                degraded: true,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BatchOutcome {
    Answered { answer: String, cited: Vec<String> },
    Refused,
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchReply {
    pub outcome: BatchOutcome,
    pub requests: usize,
}

/// One answer call over a batch of articles. Unparseable replies are
/// retried up to `max_parse_retries` times; provider errors propagate.
pub fn generate_answer(
    client: &dyn LlmClient,
    query: &str,
    articles: &[ShownArticle],
    max_parse_retries: u32,
) -> Result<BatchReply> {
    if articles.is_empty() {
        return Err(Error::InvalidArgument("an answer call needs at least one article".into()));
    }
    let prompt = answer_prompt(articles, query);
    let mut requests = 0;
    loop {
        let reply = client.complete(&prompt)?;
        requests += 1;
        match parse_answer(&reply) {
            Ok(a) if a.answerable => {
                let mut seen = HashSet::new();
                let cited = a
                    .cited_article_ids
                    .into_iter()
                    .filter(|id| articles.iter().any(|s| &s.id == id) && seen.insert(id.clone()))
                    .collect();
                return Ok(BatchReply {
                    outcome: BatchOutcome::Answered {
                        answer: a.answer.trim().to_owned(),
                        cited,
                    },
                    requests,
                });
            }
            Ok(_) => {
                return Ok(BatchReply {
                    outcome: BatchOutcome::Refused,
                    requests,
                })
            }
            Err(why) if requests > max_parse_retries as usize => {
                tracing::warn!(error = %why, requests, "giving up on unparseable answer replies");
                return Ok(BatchReply {
                    outcome: BatchOutcome::ParseFailure,
                    requests,
                });
            }
            Err(why) => tracing::debug!(error = %why, "unparseable answer reply, retrying"),
        }
    }
}

struct Session<'a> {
    client: &'a dyn LlmClient,
    corpus: &'a Corpus,
    query: &'a str,
    config: &'a PipelineConfig,
    result: AnswerResult,
}

impl Session<'_> {
    /// Sends one batch; returns true once answered.
    fn ask(&mut self, ids: &[String]) -> Result<bool> {
        let shown = ids
            .iter()
            .map(|id| {
                self.corpus
                    .article(id)
                    .map(ShownArticle::from)
                    .ok_or_else(|| Error::UnknownArticle(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let reply = generate_answer(self.client, self.query, &shown, self.config.max_parse_retries)?;
        let r = &mut self.result;
        r.llm_calls_used += 1;
        r.llm_requests += reply.requests;
        r.consulted_article_ids.extend(ids.iter().cloned());
        match reply.outcome {
            BatchOutcome::Answered { answer, cited } => {
                r.status = AnswerStatus::Answered;
                r.answer_text = answer;
                r.supporting_article_ids = cited;
                Ok(true)
            }
            BatchOutcome::Refused => Ok(false),
            BatchOutcome::ParseFailure => {
                r.parse_failure = true;
                Ok(false)
            }
        }
    }
}

/// Batched answering over the top articles, then over articles reached by
/// walking further down the chunk ranking until the chunk cap.
pub fn active_retrieval(
    client: &dyn LlmClient,
    query: &str,
    ranked_articles: &RankedList,
    ranked_chunks: &RankedList,
    corpus: &Corpus,
    config: &PipelineConfig,
) -> Result<AnswerResult> {
    let mut s = Session {
        client,
        corpus,
        query,
        config,
        result: AnswerResult::no_answer(),
    };
    let primary: Vec<String> = ranked_articles
        .ids()
        .take(config.primary_article_limit)
        .map(str::to_owned)
        .collect();
    for batch in primary.chunks(config.batch_size) {
        if s.ask(batch)? {
            return Ok(s.result);
        }
    }

    let mut shown: HashSet<String> = primary.into_iter().collect();
    let article_of = |chunk_id: &str| {
        corpus
            .chunk(chunk_id)
            .map(|c| c.article_id.clone())
            .ok_or_else(|| Error::UnknownChunk(chunk_id.to_owned()))
    };
    let hits = ranked_chunks.hits();
    // chunks before the first non-primary article all belong to the primary set
    let mut pos = 0;
    while pos < hits.len() && shown.contains(&article_of(&hits[pos].id)?) {
        pos += 1;
    }
    let mut pending: Vec<String> = Vec::with_capacity(config.batch_size);
    while pos < hits.len().min(config.active_retrieval_chunk_cap) {
        let article = article_of(&hits[pos].id)?;
        pos += 1;
        if shown.insert(article.clone()) {
            pending.push(article);
        }
        if pending.len() == config.batch_size {
            s.result.active_retrieval_engaged = true;
            if s.ask(&pending)? {
                return Ok(s.result);
            }
            pending.clear();
        }
    }
    if !pending.is_empty() {
        s.result.active_retrieval_engaged = true;
        s.ask(&pending)?;
    }
    Ok(s.result)
}

/// Re-scores candidate chunks against the answer text with both retrievers
/// and fuses the candidate-local normalized scores.
pub fn rerank_by_answer(
    answer: &AnswerResult,
    candidates: &[&Chunk],
    indexes: &Indexes<'_>,
    fusion: &FusionConfig,
) -> Result<RankedList> {
    let mut seen = HashSet::new();
    let ids: Vec<&str> = candidates
        .iter()
        .map(|c| c.chunk_id.as_str())
        .filter(|id| seen.insert(*id))
        .collect();
    if ids.is_empty() {
        return Ok(RankedList::new());
    }
    let terms = indexes.corpus.analyzer().query_terms(&answer.answer_text);
    let lexical = indexes.lexical.score_candidates(&terms, &ids)?;
    let q = embed_query(indexes.embedder, &answer.answer_text)?;
    let dense = indexes.dense.score_candidates(&q, &ids)?;
    let as_list = |scores: Vec<f64>| {
        RankedList::from_unsorted(ids.iter().zip(scores).map(|(id, s)| ScoredHit::new(*id, s)).collect())
    };
    Ok(fuse(&as_list(lexical), &as_list(dense), fusion))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub answer: AnswerResult,
    /// Re-ranked chunks above the sentinel; empty without an answer.
    pub references: RankedList,
    /// Query used for retrieval after rewriting.
    pub search_query: String,
    pub rewrite_degraded: bool,
    /// Article ranking handed to answering.
    pub ranked_articles: RankedList,
}

/// Rewrite, hybrid retrieval, Active Retrieval answering and re-ranking.
/// The model sees the user's original question; the rewrite only drives
/// retrieval.
pub fn answer_pipeline(
    client: &dyn LlmClient,
    indexes: &Indexes<'_>,
    raw_query: &str,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    config.validate()?;
    indexes.check()?;
    if indexes.corpus.articles().is_empty() {
        return Err(Error::EmptyIndex);
    }
    let mut llm_requests = 0;
    let rewrite = if config.rewrite_enabled {
        llm_requests += 1;
        rewrite_query(client, raw_query)
    } else {
        RewriteOutcome {
            query: raw_query.to_owned(),
            degraded: false,
        }
    };
    let chunks = indexes.retrieve(
        Retriever::Hybrid,
        &rewrite.query,
        config.search_k,
        &config.fusion,
        config.long_query,
    )?;
    let articles = indexes.to_articles(&chunks)?;
    let mut answer = active_retrieval(client, raw_query, &articles, &chunks, indexes.corpus, config)?;
    answer.llm_requests += llm_requests;

    let references = if answer.is_answered() {
        let corpus = indexes.corpus;
        let mut candidates: Vec<&Chunk> = answer
            .consulted_article_ids
            .iter()
            .flat_map(|a| corpus.chunks_of(a))
            .collect();
        candidates.push(corpus.sentinel());
        let reranked = rerank_by_answer(&answer, &candidates, indexes, &config.fusion)?;
        let above: Vec<ScoredHit> = reranked
            .into_hits()
            .into_iter()
            .take_while(|h| h.id != SENTINEL_CHUNK_ID)
            .collect();
        RankedList::from_ordered(above)
    } else {
        RankedList::new()
    };
    Ok(PipelineOutcome {
        answer,
        references,
        search_query: rewrite.query,
        rewrite_degraded: rewrite.degraded,
        ranked_articles: articles,
    })
}

#[cfg(test)]
mod tests;
