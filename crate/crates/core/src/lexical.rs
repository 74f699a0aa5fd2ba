//! BM25 inverted index over chunk lexical tokens.
//!
//! ```text
//! score(D, Q) = Σ_i idf(q_i) · f(q_i, D)·(k1 + 1) / (f(q_i, D) + k1·(1 − b + b·|D|/avgdl))
//! idf(q)      = ln((N − n(q) + 0.5) / (n(q) + 0.5) + 1)
//! ```
//!
//! Query terms are summed as given, so a repeated term counts once per
//! occurrence.
//!
//! # On-disk layout (format version 1)
//!
//! `manifest.json` holds `{format_version, doc_count, avgdl, k1, b,
//! term_count}`; `docs.jsonl` lists `{chunk_id, len}` in ordinal order
//! (ascending chunk id); `postings.bin` is the magic `HQBM25PS`, a `u32`
//! LE version and a `u32` LE term count, followed by one record per term in
//! ascending byte order: `varint term_len, term bytes, varint df`, then
//! `df` pairs of `varint ordinal_delta, varint tf`. Varints are unsigned
//! LEB128.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::ranked::{top_k, RankedList, ScoredHit};

pub const LEXICAL_FORMAT_VERSION: u32 = 1;
const POSTINGS_MAGIC: &[u8; 8] = b"HQBM25PS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.65 }
    }
}

/// `ln((N − n + 0.5)/(n + 0.5) + 1)`.
pub fn bm25_idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_freq as f64;
    ((doc_count as f64 - n + 0.5) / (n + 0.5) + 1.0).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DocEntry {
    chunk_id: String,
    len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    params: Bm25Params,
    docs: Vec<DocEntry>,
    doc_pos: HashMap<String, u32>,
    postings: HashMap<String, Vec<Posting>>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn build(chunks: &[Chunk]) -> Result<Self> {
        Self::build_with(chunks, Bm25Params::default())
    }

    pub fn build_with(chunks: &[Chunk], params: Bm25Params) -> Result<Self> {
        Self::from_documents(
            chunks.iter().map(|c| (c.chunk_id.as_str(), c.lexical_tokens.as_slice())),
            params,
        )
    }

    /// Builds from `(id, terms)` pairs.
    pub fn from_documents<'a, I, S>(docs: I, params: Bm25Params) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a [S])>,
        S: AsRef<str> + 'a,
    {
        let mut input: Vec<(&str, &[S])> = docs.into_iter().collect();
        if input.is_empty() {
            return Err(Error::EmptyIndex);
        }
        input.sort_by(|a, b| a.0.cmp(b.0));
        if let Some(w) = input.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.to_owned()));
        }

        let mut docs = Vec::with_capacity(input.len());
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        for (ordinal, (id, terms)) in input.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in terms.iter() {
                *tf.entry(t.as_ref()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_owned()).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf: count,
                });
            }
            docs.push(DocEntry {
                chunk_id: (*id).to_owned(),
                len: terms.len() as u32,
            });
        }
        Ok(Self::assemble(params, docs, postings))
    }

    fn assemble(params: Bm25Params, docs: Vec<DocEntry>, postings: HashMap<String, Vec<Posting>>) -> Self {
        let total: u64 = docs.iter().map(|d| u64::from(d.len)).sum();
        let avgdl = total as f64 / docs.len() as f64;
        let doc_pos = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.chunk_id.clone(), i as u32))
            .collect();
        Self {
            params,
            docs,
            doc_pos,
            postings,
            avgdl,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_len(&self, chunk_id: &str) -> Option<usize> {
        self.doc_pos
            .get(chunk_id)
            .map(|&i| self.docs[i as usize].len as usize)
    }

    /// Number of chunks containing `term`.
    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(chunk_id, tf)` postings for a term, in chunk id order.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings.get(term).map_or_else(Vec::new, |list| {
            list.iter()
                .map(|p| (self.docs[p.doc as usize].chunk_id.as_str(), p.tf))
                .collect()
        })
    }

    pub fn idf(&self, term: &str) -> f64 {
        bm25_idf(self.doc_count(), self.doc_freq(term))
    }

    fn term_weight(&self, idf: f64, tf: u32, len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let f = f64::from(tf);
        let norm = 1.0 - b + b * f64::from(len) / self.avgdl;
        idf * f * (k1 + 1.0) / (f + k1 * norm)
    }

    fn tf_in(&self, term: &str, doc: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|list| {
                list.binary_search_by_key(&doc, |p| p.doc)
                    .ok()
                    .map(|i| list[i].tf)
            })
            .unwrap_or(0)
    }

    fn score_ordinal<S: AsRef<str>>(&self, query: &[S], doc: u32) -> f64 {
        let len = self.docs[doc as usize].len;
        query
            .iter()
            .map(|q| {
                let q = q.as_ref();
                match self.tf_in(q, doc) {
                    0 => 0.0,
                    tf => self.term_weight(self.idf(q), tf, len),
                }
            })
            .sum()
    }

    /// BM25 score of one chunk.
    pub fn score<S: AsRef<str>>(&self, query: &[S], chunk_id: &str) -> Result<f64> {
        let &doc = self
            .doc_pos
            .get(chunk_id)
            .ok_or_else(|| Error::UnknownChunk(chunk_id.to_owned()))?;
        Ok(self.score_ordinal(query, doc))
    }

    /// Scores an explicit candidate set, in the given order.
    pub fn score_candidates<S: AsRef<str>>(&self, query: &[S], chunk_ids: &[&str]) -> Result<Vec<f64>> {
        chunk_ids.iter().map(|id| self.score(query, id)).collect()
    }

    /// Top-`k` chunks by BM25. Chunks scoring zero are left out.
    pub fn search<S: AsRef<str>>(&self, query: &[S], k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for q in query {
            let q = q.as_ref();
            let Some(list) = self.postings.get(q) else {
                continue;
            };
            let idf = bm25_idf(self.doc_count(), list.len());
            for p in list {
                let w = self.term_weight(idf, p.tf, self.docs[p.doc as usize].len);
                *acc.entry(p.doc).or_insert(0.0) += w;
            }
        }
        let hits = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(doc, s)| ScoredHit::new(self.docs[doc as usize].chunk_id.clone(), s))
            .collect();
        Ok(RankedList::from_ordered(top_k(hits, k)))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        jsonl::write_json(
            &dir.join("manifest.json"),
            &LexicalManifest {
                format_version: LEXICAL_FORMAT_VERSION,
                doc_count: self.doc_count(),
                avgdl: self.avgdl,
                k1: self.params.k1,
                b: self.params.b,
                term_count: self.term_count(),
            },
        )?;
        jsonl::write(&dir.join("docs.jsonl"), &self.docs)?;
        let path = dir.join("postings.bin");
        std::fs::write(&path, self.encode_postings()).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: LexicalManifest = jsonl::read_json(&dir.join("manifest.json"))?;
        if manifest.format_version != LEXICAL_FORMAT_VERSION {
            return Err(Error::format(
                "lexical manifest",
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        let docs: Vec<DocEntry> = jsonl::read(&dir.join("docs.jsonl"))?;
        if docs.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if docs.len() != manifest.doc_count {
            return Err(Error::format("lexical index", "doc count disagrees with manifest"));
        }
        let path = dir.join("postings.bin");
        let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let postings = decode_postings(&raw, docs.len())?;
        if postings.len() != manifest.term_count {
            return Err(Error::format("lexical index", "term count disagrees with manifest"));
        }
        let index = Self::assemble(
            Bm25Params {
                k1: manifest.k1,
                b: manifest.b,
            },
            docs,
            postings,
        );
        if index.avgdl != manifest.avgdl {
            return Err(Error::format("lexical index", "avgdl disagrees with document lengths"));
        }
        Ok(index)
    }

    fn encode_postings(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(POSTINGS_MAGIC);
        out.extend_from_slice(&LEXICAL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.postings.len() as u32).to_le_bytes());
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort_unstable();
        for term in terms {
            let list = &self.postings[term];
            write_varint(&mut out, term.len() as u64);
            out.extend_from_slice(term.as_bytes());
            write_varint(&mut out, list.len() as u64);
            let mut prev = 0u32;
            for p in list {
                write_varint(&mut out, u64::from(p.doc - prev));
                write_varint(&mut out, u64::from(p.tf));
                prev = p.doc;
            }
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LexicalManifest {
    format_version: u32,
    doc_count: usize,
    avgdl: f64,
    k1: f64,
    b: f64,
    term_count: usize,
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::format("postings", "unexpected end of file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.take(1)?[0];
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::format("postings", "varint overflow"))
    }
}

fn decode_postings(raw: &[u8], doc_count: usize) -> Result<HashMap<String, Vec<Posting>>> {
    let mut r = Reader { buf: raw, pos: 0 };
    if r.take(8)? != POSTINGS_MAGIC {
        return Err(Error::format("postings", "bad magic"));
    }
    let version = r.u32_le()?;
    if version != LEXICAL_FORMAT_VERSION {
        return Err(Error::format("postings", format!("unsupported version {version}")));
    }
    let term_count = r.u32_le()? as usize;
    let mut postings = HashMap::with_capacity(term_count);
    for _ in 0..term_count {
        let len = r.varint()? as usize;
        let term = std::str::from_utf8(r.take(len)?)
            .map_err(|e| Error::format("postings", e))?
            .to_owned();
        let df = r.varint()? as usize;
        let mut list = Vec::with_capacity(df);
        let mut doc = 0u64;
        for i in 0..df {
            let delta = r.varint()?;
            if i > 0 && delta == 0 {
                return Err(Error::format("postings", "non-increasing ordinals"));
            }
            doc += delta;
            let tf = r.varint()?;
            if doc as usize >= doc_count || tf == 0 {
                return Err(Error::format("postings", "posting out of range"));
            }
            list.push(Posting {
                doc: doc as u32,
                tf: tf as u32,
            });
        }
        postings.insert(term, list);
    }
    if r.pos != raw.len() {
        return Err(Error::format("postings", "trailing bytes"));
    }
    Ok(postings)
}
