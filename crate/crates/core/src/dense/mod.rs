//! Dense vector index with exact and HNSW search over cosine similarity.
//!
//! Vectors are unit-normalized on the way in, so cosine reduces to a dot
//! product. Rows are kept in ascending chunk-id order.
//!
//! # On-disk layout (format version 1)
//!
//! `vectors.bin` starts with a single JSON header line
//! `{version, d, count, mode, graph_params, provider}` terminated by `\n`,
//! followed by `count` rows of `d` little-endian `f32`. `ids.json` is the
//! JSON array of chunk ids in row order. HNSW indexes also write
//! `graph.bin` (magic `HQHNSWG\0`, then little-endian `u32` words: version,
//! node count, entry point, max level, and per node its layer count
//! followed by `len, neighbors...` for each layer).

mod embed;
mod hnsw;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embed::{embed_query, unit_normalize, EmbeddingProvider, HashingEmbedder, ProviderSpec};
#[cfg(feature = "http")]
pub use embed::HttpEmbedder;
pub use hnsw::{HnswGraph, HnswParams};

use crate::corpus::Chunk;
use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::jsonl;
use crate::ranked::{top_k, RankedList, ScoredHit};
use hnsw::{dot, Rows};

pub const DENSE_FORMAT_VERSION: u32 = 1;
const EMBED_BATCH: usize = 32;
const SCAN_BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    #[default]
    Exact,
    #[serde(alias = "approximate")]
    Hnsw,
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(SearchMode::Exact),
            "hnsw" | "approximate" => Ok(SearchMode::Hnsw),
            other => Err(Error::InvalidArgument(format!("unknown search mode {other:?}"))),
        }
    }
}

/// `u·v / (|u||v|)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseIndex {
    dim: usize,
    ids: Vec<String>,
    id_pos: HashMap<String, u32>,
    data: Vec<f32>,
    mode: SearchMode,
    hnsw_params: HnswParams,
    graph: Option<HnswGraph>,
    provider: Option<ProviderSpec>,
    parallelism: Parallelism,
}

impl DenseIndex {
    /// Embeds each chunk's dense text and indexes the unit vectors.
    pub fn build(
        chunks: &[Chunk],
        provider: &dyn EmbeddingProvider,
        mode: SearchMode,
        params: HnswParams,
        parallelism: Parallelism,
    ) -> Result<Self> {
        if chunks.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut sorted: Vec<&Chunk> = chunks.iter().collect();
        sorted.sort_by(|a, b| a.chunk_id.cmp(&b.chunk_id));
        let batches: Vec<&[&Chunk]> = sorted.chunks(EMBED_BATCH).collect();
        let dim = provider.dimension();
        let embedded = exec::try_map(&batches, parallelism, |batch| embed_batch(provider, batch, dim))?;
        let vectors: Vec<Vec<f32>> = embedded.into_iter().flatten().collect();
        let ids = sorted.iter().map(|c| c.chunk_id.clone()).collect();
        let mut index = Self::from_vectors(ids, vectors, mode, params, parallelism)?;
        index.provider = Some(provider.spec());
        Ok(index)
    }

    /// Indexes raw vectors under the given ids; vectors are normalized here.
    pub fn from_vectors(
        ids: Vec<String>,
        vectors: Vec<Vec<f32>>,
        mode: SearchMode,
        params: HnswParams,
        parallelism: Parallelism,
    ) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if ids.len() != vectors.len() {
            return Err(Error::InvalidArgument("ids and vectors differ in length".into()));
        }
        let dim = vectors[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("vectors must have at least one component".into()));
        }
        let mut rows: Vec<(String, Vec<f32>)> = ids.into_iter().zip(vectors).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.clone()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        let mut ids = Vec::with_capacity(rows.len());
        for (id, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            data.extend(unit_normalize(&v)?);
            ids.push(id);
        }
        Self::assemble(dim, ids, data, mode, params, None, None, parallelism)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        dim: usize,
        ids: Vec<String>,
        data: Vec<f32>,
        mode: SearchMode,
        params: HnswParams,
        graph: Option<HnswGraph>,
        provider: Option<ProviderSpec>,
        parallelism: Parallelism,
    ) -> Result<Self> {
        let id_pos = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        let graph = match (mode, graph) {
            (SearchMode::Hnsw, Some(g)) => Some(g),
            (SearchMode::Hnsw, None) => Some(HnswGraph::build(Rows { data: &data, dim }, params)?),
            (SearchMode::Exact, _) => None,
        };
        Ok(Self {
            dim,
            ids,
            id_pos,
            data,
            mode,
            hnsw_params: params,
            graph,
            provider,
            parallelism,
        })
    }

    fn rows(&self) -> Rows<'_> {
        Rows {
            data: &self.data,
            dim: self.dim,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn provider_spec(&self) -> Option<&ProviderSpec> {
        self.provider.as_ref()
    }

    pub fn set_parallelism(&mut self, parallelism: Parallelism) {
        self.parallelism = parallelism;
    }

    /// Stored unit vector for a chunk.
    pub fn vector(&self, chunk_id: &str) -> Option<&[f32]> {
        self.id_pos.get(chunk_id).map(|&i| self.rows().row(i))
    }

    fn check_query(&self, query: &[f32], k: usize) -> Result<Vec<f32>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        unit_normalize(query)
    }

    /// Top-`k` chunks by cosine similarity, using the index's mode.
    pub fn search(&self, query: &[f32], k: usize) -> Result<RankedList> {
        match self.mode {
            SearchMode::Exact => self.search_exact(query, k),
            SearchMode::Hnsw => self.search_approximate(query, k),
        }
    }

    /// Exhaustive scan.
    pub fn search_exact(&self, query: &[f32], k: usize) -> Result<RankedList> {
        let q = self.check_query(query, k)?;
        let rows = self.rows();
        let blocks: Vec<(usize, usize)> = (0..self.len())
            .step_by(SCAN_BLOCK)
            .map(|s| (s, (s + SCAN_BLOCK).min(self.len())))
            .collect();
        let scored = exec::map(&blocks, self.parallelism, |&(s, e)| {
            let hits: Vec<ScoredHit> = (s..e)
                .map(|i| ScoredHit::new(self.ids[i].clone(), dot(&q, rows.row(i as u32))))
                .collect();
            top_k(hits, k)
        });
        Ok(RankedList::from_ordered(top_k(scored.into_iter().flatten().collect(), k)))
    }

    /// Graph search; falls back to an exact scan for exact-mode indexes.
    pub fn search_approximate(&self, query: &[f32], k: usize) -> Result<RankedList> {
        let Some(graph) = &self.graph else {
            return self.search_exact(query, k);
        };
        let q = self.check_query(query, k)?;
        let k = k.min(self.len());
        let hits = graph
            .search(self.rows(), &q, k, self.hnsw_params.ef_search)
            .into_iter()
            .map(|(node, sim)| ScoredHit::new(self.ids[node as usize].clone(), sim))
            .collect();
        Ok(RankedList::from_unsorted(hits))
    }

    /// Cosine of the query against specific chunks, in the given order.
    pub fn score_candidates(&self, query: &[f32], chunk_ids: &[&str]) -> Result<Vec<f64>> {
        let q = self.check_query(query, 1)?;
        chunk_ids
            .iter()
            .map(|id| {
                self.vector(id)
                    .map(|v| dot(&q, v))
                    .ok_or_else(|| Error::UnknownChunk((*id).to_owned()))
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = VectorHeader {
            version: DENSE_FORMAT_VERSION,
            d: self.dim,
            count: self.len(),
            mode: self.mode,
            graph_params: self.hnsw_params,
            provider: self.provider.clone(),
        };
        let path = dir.join("vectors.bin");
        let mut buf = serde_json::to_vec(&header).map_err(|e| Error::format("vector header", e))?;
        buf.push(b'\n');
        buf.reserve(self.data.len() * 4);
        for x in &self.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let mut f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(&path, e))?;
        jsonl::write_json(&dir.join("ids.json"), &self.ids)?;
        if let Some(g) = &self.graph {
            let gp = dir.join("graph.bin");
            std::fs::write(&gp, g.encode()).map_err(|e| Error::io(&gp, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("vectors.bin");
        let raw = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let nl = raw
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("vector store", "missing header line"))?;
        let header: VectorHeader =
            serde_json::from_slice(&raw[..nl]).map_err(|e| Error::format("vector header", e))?;
        if header.version != DENSE_FORMAT_VERSION {
            return Err(Error::format(
                "vector store",
                format!("unsupported format version {}", header.version),
            ));
        }
        let body = &raw[nl + 1..];
        if header.d == 0 || header.count == 0 || body.len() != header.d * header.count * 4 {
            return Err(Error::format("vector store", "row data does not match header"));
        }
        let data: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let ids: Vec<String> = jsonl::read_json(&dir.join("ids.json"))?;
        if ids.len() != header.count || ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::format("vector store", "id table must be sorted, unique and match count"));
        }
        let graph = match header.mode {
            SearchMode::Hnsw => {
                let gp = dir.join("graph.bin");
                let graw = std::fs::read(&gp).map_err(|e| Error::io(&gp, e))?;
                Some(HnswGraph::decode(&graw, header.graph_params, header.count)?)
            }
            SearchMode::Exact => None,
        };
        Self::assemble(
            header.d,
            ids,
            data,
            header.mode,
            header.graph_params,
            graph,
            header.provider,
            Parallelism::default(),
        )
    }

    /// Re-creates the provider this index was built with.
    pub fn provider(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        self.provider
            .as_ref()
            .ok_or_else(|| Error::Config("index was built from raw vectors and records no provider".into()))?
            .instantiate()
    }
}

fn embed_batch(provider: &dyn EmbeddingProvider, batch: &[&Chunk], dim: usize) -> Result<Vec<Vec<f32>>> {
    let texts: Vec<&str> = batch.iter().map(|c| c.dense_text.as_str()).collect();
    let vectors = match provider.embed_batch(&texts) {
        Ok(v) => v,
        // pin the failure on a specific chunk
        Err(batch_err) => {
            let mut out = Vec::with_capacity(batch.len());
            for c in batch {
                out.push(provider.embed(&c.dense_text).map_err(|source| Error::Embedding {
                    chunk_id: c.chunk_id.clone(),
                    source,
                })?);
            }
            tracing::debug!(error = %batch_err, "batch embedding failed but per-chunk retry succeeded");
            out
        }
    };
    for (c, v) in batch.iter().zip(&vectors) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::Embedding {
                chunk_id: c.chunk_id.clone(),
                source: crate::error::ProviderError::BadResponse("zero vector".into()),
            });
        }
    }
    Ok(vectors)
}

#[derive(Debug, Serialize, Deserialize)]
struct VectorHeader {
    version: u32,
    d: usize,
    count: usize,
    mode: SearchMode,
    graph_params: HnswParams,
    #[serde(default)]
    provider: Option<ProviderSpec>,
}
