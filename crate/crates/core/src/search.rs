//! Query-side retrieval over a built corpus: lexical, dense and hybrid chunk
//! rankings, with long-question handling.

use serde::{Deserialize, Serialize};

use crate::corpus::{decompose_query, truncate_query, Corpus, SENTINEL_CHUNK_ID};
use crate::dense::{embed_query, DenseIndex, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::fusion::{chunks_to_articles, fuse, merge_subquery_results, FusionConfig};
use crate::lexical::Bm25Index;
use crate::ranked::RankedList;

/// Borrowed view over everything a query needs.
#[derive(Clone, Copy)]
pub struct Indexes<'a> {
    pub corpus: &'a Corpus,
    pub lexical: &'a Bm25Index,
    pub dense: &'a DenseIndex,
    pub embedder: &'a dyn EmbeddingProvider,
}

/// What to do with a question longer than the query token budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LongQuery {
    /// Search each window separately and merge.
    #[default]
    Decompose,
    /// Keep only the trailing window.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    Lexical,
    Dense,
    Hybrid,
}

impl<'a> Indexes<'a> {
    pub fn check(&self) -> Result<()> {
        if self.dense.dimension() != self.embedder.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dense.dimension(),
                actual: self.embedder.dimension(),
            });
        }
        Ok(())
    }

    /// Splits or trims the question to the corpus's query budget.
    pub fn query_parts(&self, question: &str, long_query: LongQuery) -> Vec<String> {
        let cfg = self.corpus.config();
        let analyzer = self.corpus.analyzer();
        let parts = match long_query {
            LongQuery::Decompose => decompose_query(analyzer, question, cfg.max_query_tokens),
            LongQuery::Truncate => vec![truncate_query(analyzer, question, cfg.max_query_tokens)],
        };
        if parts.is_empty() {
            vec![String::new()]
        } else {
            parts
        }
    }

    /// BM25 top-`k` chunks, sentinel excluded.
    pub fn lexical(&self, text: &str, k: usize) -> Result<RankedList> {
        let terms = self.corpus.analyzer().query_terms(text);
        let mut list = self.lexical.search(&terms, k.saturating_add(1))?;
        drop_sentinel(&mut list, k);
        Ok(list)
    }

    /// Cosine top-`k` chunks, sentinel excluded.
    pub fn dense(&self, text: &str, k: usize) -> Result<RankedList> {
        let q = embed_query(self.embedder, text)?;
        let mut list = self.dense.search(&q, k.saturating_add(1))?;
        drop_sentinel(&mut list, k);
        Ok(list)
    }

    /// Fused top-`k` chunks.
    pub fn hybrid(&self, text: &str, k: usize, fusion: &FusionConfig) -> Result<RankedList> {
        let lex = self.lexical(text, k)?;
        let den = self.dense(text, k)?;
        let mut fused = fuse(&lex, &den, fusion);
        fused.truncate(k);
        Ok(fused)
    }

    /// One retriever over a possibly long question.
    pub fn retrieve(
        &self,
        retriever: Retriever,
        question: &str,
        k: usize,
        fusion: &FusionConfig,
        long_query: LongQuery,
    ) -> Result<RankedList> {
        let parts = self.query_parts(question, long_query);
        let run = |text: &str| match retriever {
            Retriever::Lexical => self.lexical(text, k),
            Retriever::Dense => self.dense(text, k),
            Retriever::Hybrid => self.hybrid(text, k, fusion),
        };
        if let [single] = parts.as_slice() {
            return run(single);
        }
        let lists = parts.iter().map(|p| run(p)).collect::<Result<Vec<_>>>()?;
        let mut merged = merge_subquery_results(&lists);
        merged.truncate(k);
        Ok(merged)
    }

    /// Article ranking for a chunk ranking.
    pub fn to_articles(&self, chunks: &RankedList) -> Result<RankedList> {
        chunks_to_articles(chunks, &self.corpus.provenance())
    }
}

fn drop_sentinel(list: &mut RankedList, k: usize) {
    list.retain(|h| h.id != SENTINEL_CHUNK_ID);
    list.truncate(k);
}
