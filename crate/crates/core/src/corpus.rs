//! Article ingestion: normalization, section-first overlap chunking,
//! metadata enrichment, the negative sentinel chunk, and the on-disk
//! corpus layout.
//!
//! Token counts and spans are always measured in segmenter tokens of the
//! normalized article body.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::jsonl;
use crate::text::{normalize_text, Analyzer, Stoplist};
use crate::NO_ANSWER;

/// Chunk id reserved for the negative sentinel.
pub const SENTINEL_CHUNK_ID: &str = "#sentinel";

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionHeader {
    /// Token offset into the normalized body where the section starts.
    pub offset: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub section_headers: Vec<SectionHeader>,
    #[serde(default)]
    pub source_meta: BTreeMap<String, String>,
}

impl Article {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            section_headers: Vec::new(),
            source_meta: BTreeMap::new(),
        }
    }

    pub fn with_sections(mut self, headers: Vec<SectionHeader>) -> Self {
        self.section_headers = headers;
        self
    }

    /// Label of the section containing token `offset`, if any.
    pub fn section_label_at(&self, offset: usize) -> Option<&str> {
        self.section_headers
            .iter()
            .filter(|h| h.offset <= offset)
            .max_by_key(|h| h.offset)
            .map(|h| h.label.as_str())
            .filter(|l| !l.is_empty())
    }

    fn normalize(mut self) -> Result<Self> {
        self.title = normalize_text(&self.title);
        self.body = normalize_text(&self.body);
        for h in &mut self.section_headers {
            h.label = normalize_text(&h.label);
        }
        if self.id.is_empty() {
            return Err(Error::InvalidArgument("article with empty id".into()));
        }
        if self.body.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "article {} has an empty body after normalization",
                self.id
            )));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub article_id: String,
    pub chunk_index: usize,
    /// Half-open `[start, end)` in article tokens.
    pub token_span: (usize, usize),
    pub text: String,
    pub lexical_tokens: Vec<String>,
    pub dense_text: String,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    #[serde(default)]
    pub is_sentinel: bool,
}

impl Chunk {
    pub fn token_len(&self) -> usize {
        self.token_span.1 - self.token_span.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub max_chunk_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            max_chunk_tokens: 256,
            overlap_tokens: 64,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_chunk_tokens <= self.overlap_tokens {
            return Err(Error::Config(format!(
                "max_chunk_tokens ({}) must exceed overlap_tokens ({})",
                self.max_chunk_tokens, self.overlap_tokens
            )));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.max_chunk_tokens - self.overlap_tokens
    }
}

/// Overlapping windows over `[start, end)`.
///
/// A range that fits in one window is returned whole. Otherwise windows of
/// `max_chunk_tokens` advance by the stride and the last one is cut at
/// `end`, so every adjacent pair shares exactly `overlap_tokens`.
pub fn window_spans(start: usize, end: usize, cfg: &ChunkingConfig) -> Vec<(usize, usize)> {
    debug_assert!(cfg.max_chunk_tokens > cfg.overlap_tokens);
    if end <= start {
        return Vec::new();
    }
    if end - start <= cfg.max_chunk_tokens {
        return vec![(start, end)];
    }
    let mut spans = Vec::new();
    let mut s = start;
    loop {
        let e = (s + cfg.max_chunk_tokens).min(end);
        spans.push((s, e));
        if e == end {
            break;
        }
        s += cfg.stride();
    }
    spans
}

/// Splits `[0, n_tokens)` into sections. Text before the first header
/// becomes an unlabeled leading section; headers at or past the end are
/// ignored.
pub fn section_ranges(n_tokens: usize, headers: &[SectionHeader]) -> Vec<(usize, usize)> {
    let mut offsets: Vec<usize> = headers
        .iter()
        .map(|h| h.offset)
        .filter(|&o| o < n_tokens)
        .collect();
    offsets.sort_unstable();
    offsets.dedup();
    if offsets.first() != Some(&0) {
        offsets.insert(0, 0);
    }
    let mut ranges = Vec::with_capacity(offsets.len());
    for (i, &start) in offsets.iter().enumerate() {
        let end = offsets.get(i + 1).copied().unwrap_or(n_tokens);
        if end > start {
            ranges.push((start, end));
        }
    }
    ranges
}

/// All chunk spans for an article of `n_tokens` tokens.
pub fn plan_chunks(
    n_tokens: usize,
    headers: &[SectionHeader],
    cfg: &ChunkingConfig,
) -> Vec<(usize, usize)> {
    section_ranges(n_tokens, headers)
        .into_iter()
        .flat_map(|(s, e)| window_spans(s, e, cfg))
        .collect()
}

/// Cuts a normalized article into chunks: sections that fit become one
/// chunk each, larger sections (or a sectionless body) are windowed.
///
/// Chunks come back unenriched; see [`enrich_metadata`].
pub fn chunk_article(
    article: &Article,
    analyzer: &Analyzer,
    cfg: &ChunkingConfig,
) -> Result<Vec<Chunk>> {
    cfg.validate()?;
    let tokens = analyzer.segment(&article.body);
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "article {} has no tokens",
            article.id
        )));
    }
    let chunks = plan_chunks(tokens.len(), &article.section_headers, cfg)
        .into_iter()
        .enumerate()
        .map(|(chunk_index, (start, end))| {
            let slice = &tokens[start..end];
            let text = slice.join(" ");
            Chunk {
                chunk_id: format!("{}#{}", article.id, chunk_index),
                article_id: article.id.clone(),
                chunk_index,
                token_span: (start, end),
                lexical_tokens: analyzer.lexical_terms(slice),
                dense_text: text.clone(),
                text,
                meta: BTreeMap::new(),
                is_sentinel: false,
            }
        })
        .collect();
    Ok(chunks)
}

/// Adds title and section label to the chunk metadata and prefixes the
/// dense text with them (`"title. section. text"`).
pub fn enrich_metadata(mut chunk: Chunk, article: &Article) -> Chunk {
    debug_assert_eq!(chunk.article_id, article.id);
    let mut prefix = String::new();
    if !article.title.is_empty() {
        chunk.meta.insert("title".into(), article.title.clone());
        prefix.push_str(&article.title);
        prefix.push_str(". ");
    }
    if let Some(label) = article.section_label_at(chunk.token_span.0) {
        chunk.meta.insert("section".into(), label.to_owned());
        prefix.push_str(label);
        prefix.push_str(". ");
    }
    chunk.dense_text = format!("{prefix}{}", chunk.text);
    chunk
}

/// Keeps the last `max_query_tokens` tokens of a long question.
pub fn truncate_query(analyzer: &Analyzer, question: &str, max_query_tokens: usize) -> String {
    let tokens = analyzer.tokens(question);
    let skip = tokens.len().saturating_sub(max_query_tokens);
    tokens[skip..].join(" ")
}

/// Splits a question into consecutive non-overlapping windows of at most
/// `max_query_tokens` tokens.
pub fn decompose_query(analyzer: &Analyzer, question: &str, max_query_tokens: usize) -> Vec<String> {
    let tokens = analyzer.tokens(question);
    tokens
        .chunks(max_query_tokens.max(1))
        .map(|w| w.join(" "))
        .collect()
}

/// Builds the sentinel chunk carrying the no-answer sentence.
pub fn sentinel_chunk(text: &str, analyzer: &Analyzer) -> Result<Chunk> {
    let tokens = analyzer.tokens(text);
    if tokens.is_empty() {
        return Err(Error::Config("sentinel text must not be empty".into()));
    }
    let text = tokens.join(" ");
    Ok(Chunk {
        chunk_id: SENTINEL_CHUNK_ID.to_owned(),
        article_id: String::new(),
        chunk_index: 0,
        token_span: (0, tokens.len()),
        lexical_tokens: analyzer.lexical_terms(&tokens),
        dense_text: text.clone(),
        text,
        meta: BTreeMap::from([("role".to_owned(), "sentinel".to_owned())]),
        is_sentinel: true,
    })
}

/// Appends the negative sentinel chunk. Fails if one is already present.
pub fn insert_negative_sentinel(chunks: &mut Vec<Chunk>, text: &str, analyzer: &Analyzer) -> Result<()> {
    if chunks.iter().any(|c| c.is_sentinel) {
        return Err(Error::SentinelAlreadyPresent);
    }
    chunks.push(sentinel_chunk(text, analyzer)?);
    Ok(())
}

/// Finds section headers in a raw body by matching `pattern` at the start
/// of each line. Offsets are token offsets into the normalized body.
pub fn detect_sections(raw_body: &str, pattern: &Regex, analyzer: &Analyzer) -> Vec<SectionHeader> {
    let mut headers = Vec::new();
    let mut offset = 0;
    for line in raw_body.lines() {
        let normalized = normalize_text(line);
        if let Some(m) = pattern.find(&normalized) {
            if m.start() == 0 {
                headers.push(SectionHeader {
                    offset,
                    label: m.as_str().trim().to_owned(),
                });
            }
        }
        offset += analyzer.segment(&normalized).len();
    }
    headers
}

pub const DEFAULT_SECTION_PATTERN: &str = r"^(?:Điều|Khoản|Mục|Chương)\s+[0-9IVXLC]+[a-z]?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub raw_text: String,
    pub processed_text: String,
    pub gold_article_id: String,
}

#[derive(Debug, Deserialize)]
struct QuestionRecord {
    id: String,
    content: String,
    #[serde(default)]
    relevant_article_id: String,
}

/// Reads `{id, content, relevant_article_id}` records.
pub fn load_questions(path: &Path, analyzer: &Analyzer, max_query_tokens: usize) -> Result<Vec<Question>> {
    let records: Vec<QuestionRecord> = jsonl::read(path)?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .map(|r| {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id));
            }
            Ok(Question {
                processed_text: truncate_query(analyzer, &r.content, max_query_tokens),
                id: r.id,
                raw_text: r.content,
                gold_article_id: r.relevant_article_id,
            })
        })
        .collect()
}

pub fn load_articles(path: &Path) -> Result<Vec<Article>> {
    jsonl::read(path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub chunking: ChunkingConfig,
    pub max_query_tokens: usize,
    pub stopwords: Vec<String>,
    pub sentinel_text: String,
    /// Header pattern applied to articles that carry no explicit sections.
    pub section_pattern: Option<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            chunking: ChunkingConfig::default(),
            max_query_tokens: 256,
            stopwords: Vec::new(),
            sentinel_text: NO_ANSWER.to_owned(),
            section_pattern: None,
        }
    }
}

impl IngestConfig {
    pub fn analyzer(&self) -> Analyzer {
        Analyzer::with_stoplist(Stoplist::new(&self.stopwords))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusManifest {
    format_version: u32,
    config: IngestConfig,
    article_count: usize,
    chunk_count: usize,
}

/// A processed, immutable corpus: normalized articles plus their chunks
/// and exactly one sentinel chunk.
#[derive(Debug, Clone)]
pub struct Corpus {
    config: IngestConfig,
    analyzer: Analyzer,
    articles: Vec<Article>,
    chunks: Vec<Chunk>,
    article_pos: HashMap<String, usize>,
    chunk_pos: HashMap<String, usize>,
}

impl Corpus {
    pub fn build(raw_articles: Vec<Article>, config: IngestConfig, parallelism: Parallelism) -> Result<Self> {
        config.chunking.validate()?;
        let analyzer = config.analyzer();
        let pattern = config
            .section_pattern
            .as_deref()
            .map(Regex::new)
            .transpose()
            .map_err(|e| Error::Config(format!("section_pattern: {e}")))?;

        let mut seen = HashSet::new();
        let mut articles = Vec::with_capacity(raw_articles.len());
        for mut article in raw_articles {
            if !seen.insert(article.id.clone()) {
                return Err(Error::DuplicateId(article.id));
            }
            if article.section_headers.is_empty() {
                if let Some(p) = &pattern {
                    article.section_headers = detect_sections(&article.body, p, &analyzer);
                }
            }
            articles.push(article.normalize()?);
        }

        let per_article = exec::try_map(&articles, parallelism, |article| {
            chunk_article(article, &analyzer, &config.chunking).map(|chunks| {
                chunks
                    .into_iter()
                    .map(|c| enrich_metadata(c, article))
                    .collect::<Vec<_>>()
            })
        })?;
        let mut chunks: Vec<Chunk> = per_article.into_iter().flatten().collect();
        insert_negative_sentinel(&mut chunks, &config.sentinel_text, &analyzer)?;
        Self::from_parts(config, articles, chunks)
    }

    fn from_parts(config: IngestConfig, articles: Vec<Article>, chunks: Vec<Chunk>) -> Result<Self> {
        let mut article_pos = HashMap::with_capacity(articles.len());
        for (i, a) in articles.iter().enumerate() {
            if article_pos.insert(a.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(a.id.clone()));
            }
        }
        let mut chunk_pos = HashMap::with_capacity(chunks.len());
        for (i, c) in chunks.iter().enumerate() {
            if chunk_pos.insert(c.chunk_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(c.chunk_id.clone()));
            }
            if !c.is_sentinel && !article_pos.contains_key(&c.article_id) {
                return Err(Error::UnknownArticle(c.article_id.clone()));
            }
        }
        let sentinels = chunks.iter().filter(|c| c.is_sentinel).count();
        if sentinels != 1 {
            return Err(Error::format(
                "corpus",
                format!("expected exactly one sentinel chunk, found {sentinels}"),
            ));
        }
        Ok(Self {
            analyzer: config.analyzer(),
            config,
            articles,
            chunks,
            article_pos,
            chunk_pos,
        })
    }

    pub fn config(&self) -> &IngestConfig {
        &self.config
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.article_pos.get(id).map(|&i| &self.articles[i])
    }

    pub fn chunk(&self, id: &str) -> Option<&Chunk> {
        self.chunk_pos.get(id).map(|&i| &self.chunks[i])
    }

    pub fn sentinel(&self) -> &Chunk {
        self.chunks
            .iter()
            .find(|c| c.is_sentinel)
            .expect("corpus invariant: one sentinel")
    }

    pub fn chunks_of<'a>(&'a self, article_id: &'a str) -> impl Iterator<Item = &'a Chunk> + 'a {
        self.chunks
            .iter()
            .filter(move |c| !c.is_sentinel && c.article_id == article_id)
    }

    /// chunk id → article id for every non-sentinel chunk.
    pub fn provenance(&self) -> HashMap<String, String> {
        self.chunks
            .iter()
            .filter(|c| !c.is_sentinel)
            .map(|c| (c.chunk_id.clone(), c.article_id.clone()))
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        jsonl::write(&dir.join("articles.jsonl"), &self.articles)?;
        jsonl::write(&dir.join("chunks.jsonl"), &self.chunks)?;
        jsonl::write_json(
            &dir.join("manifest.json"),
            &CorpusManifest {
                format_version: CORPUS_FORMAT_VERSION,
                config: self.config.clone(),
                article_count: self.articles.len(),
                chunk_count: self.chunks.len(),
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: CorpusManifest = jsonl::read_json(&dir.join("manifest.json"))?;
        if manifest.format_version != CORPUS_FORMAT_VERSION {
            return Err(Error::format(
                "corpus manifest",
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        let articles: Vec<Article> = jsonl::read(&dir.join("articles.jsonl"))?;
        let chunks: Vec<Chunk> = jsonl::read(&dir.join("chunks.jsonl"))?;
        if articles.len() != manifest.article_count || chunks.len() != manifest.chunk_count {
            return Err(Error::format("corpus", "record counts disagree with manifest"));
        }
        Self::from_parts(manifest.config, articles, chunks)
    }
}
