//! Hierarchical navigable small-world graph over unit vectors, scored by
//! dot product (cosine on normalized rows).
//!
//! Construction is sequential with a seeded RNG, so a given vector set
//! always produces the same graph.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HnswParams {
    /// Links per node on the upper layers; layer 0 allows twice as many.
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 100,
            seed: 0x5eed,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.ef_construction == 0 || self.ef_search == 0 {
            return Err(Error::Config(
                "hnsw requires m >= 2 and positive ef parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major vector storage view.
#[derive(Clone, Copy)]
pub(crate) struct Rows<'a> {
    pub data: &'a [f32],
    pub dim: usize,
}

impl<'a> Rows<'a> {
    pub fn row(&self, i: u32) -> &'a [f32] {
        let s = i as usize * self.dim;
        &self.data[s..s + self.dim]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }
}

/// Sequential f64 dot product of two f32 rows.
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    sim: f64,
    node: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        // higher similarity first, then lower node id
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HnswGraph {
    params: HnswParams,
    /// node → layer → neighbor ids
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
}

impl HnswGraph {
    pub(crate) fn build(rows: Rows<'_>, params: HnswParams) -> Result<Self> {
        params.validate()?;
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyIndex);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let level_mult = 1.0 / (params.m as f64).ln();
        let mut graph = Self {
            params,
            links: Vec::with_capacity(n),
            entry: 0,
            max_level: 0,
        };
        let mut visited = Visited::new(n);
        for node in 0..n as u32 {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            let level = (-u.ln() * level_mult).floor() as usize;
            graph.insert(rows, node, level, &mut visited);
        }
        Ok(graph)
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    fn insert(&mut self, rows: Rows<'_>, node: u32, level: usize, visited: &mut Visited) {
        self.links.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let q = rows.row(node);
        let mut ep = vec![Scored {
            sim: dot(q, rows.row(self.entry)),
            node: self.entry,
        }];
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.search_layer(rows, q, &ep, 1, layer, visited);
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(rows, q, &ep, self.params.ef_construction, layer, visited);
            let chosen = select_neighbors(rows, &found, self.params.m);
            self.links[node as usize][layer] = chosen.iter().map(|s| s.node).collect();
            let cap = self.max_links(layer);
            for nb in &chosen {
                let list = &mut self.links[nb.node as usize][layer];
                list.push(node);
                if list.len() > cap {
                    let base = rows.row(nb.node);
                    let mut cands: Vec<Scored> = list
                        .iter()
                        .map(|&o| Scored {
                            sim: dot(base, rows.row(o)),
                            node: o,
                        })
                        .collect();
                    cands.sort_by(|a, b| b.cmp(a));
                    *list = select_neighbors(rows, &cands, cap)
                        .into_iter()
                        .map(|s| s.node)
                        .collect();
                }
            }
            ep = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = node;
        }
    }

    /// Beam search on one layer. Returns up to `ef` nodes, best first.
    fn search_layer(
        &self,
        rows: Rows<'_>,
        q: &[f32],
        entry: &[Scored],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Scored> {
        visited.reset();
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut best: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.node) {
                candidates.push(e);
                best.push(Reverse(e));
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(c) = candidates.pop() {
            let worst = best.peek().map(|r| r.0);
            if let Some(w) = worst {
                if best.len() >= ef && c < w {
                    break;
                }
            }
            for &nb in self.neighbors(c.node, layer) {
                if !visited.insert(nb) {
                    continue;
                }
                let s = Scored {
                    sim: dot(q, rows.row(nb)),
                    node: nb,
                };
                let admit = best.len() < ef || best.peek().is_some_and(|w| s > w.0);
                if admit {
                    candidates.push(s);
                    best.push(Reverse(s));
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = best.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    fn neighbors(&self, node: u32, layer: usize) -> &[u32] {
        self.links[node as usize]
            .get(layer)
            .map_or(&[][..], Vec::as_slice)
    }

    /// Approximate top-`k` as `(node, similarity)`, best first.
    pub(crate) fn search(&self, rows: Rows<'_>, q: &[f32], k: usize, ef: usize) -> Vec<(u32, f64)> {
        let mut visited = Visited::new(rows.len());
        let mut ep = vec![Scored {
            sim: dot(q, rows.row(self.entry)),
            node: self.entry,
        }];
        for layer in (1..=self.max_level).rev() {
            ep = self.search_layer(rows, q, &ep, 1, layer, &mut visited);
        }
        self.search_layer(rows, q, &ep, ef.max(k), 0, &mut visited)
            .into_iter()
            .take(k)
            .map(|s| (s.node, s.sim))
            .collect()
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn node_count(&self) -> usize {
        self.links.len()
    }

    pub(crate) fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(GRAPH_MAGIC);
        out.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.links.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.entry.to_le_bytes());
        out.extend_from_slice(&(self.max_level as u32).to_le_bytes());
        for layers in &self.links {
            out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
            for list in layers {
                out.extend_from_slice(&(list.len() as u32).to_le_bytes());
                for nb in list {
                    out.extend_from_slice(&nb.to_le_bytes());
                }
            }
        }
        out
    }

    pub(crate) fn decode(raw: &[u8], params: HnswParams, expected_nodes: usize) -> Result<Self> {
        let bad = |m: &str| Error::format("hnsw graph", m);
        let mut words = raw
            .get(8..)
            .ok_or_else(|| bad("truncated header"))?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")));
        if &raw[..8] != GRAPH_MAGIC || !(raw.len() - 8).is_multiple_of(4) {
            return Err(bad("bad magic or length"));
        }
        let mut next = || words.next().ok_or_else(|| bad("unexpected end of file"));
        if next()? != GRAPH_VERSION {
            return Err(bad("unsupported version"));
        }
        let n = next()? as usize;
        if n != expected_nodes {
            return Err(bad("node count disagrees with vector store"));
        }
        let entry = next()?;
        let max_level = next()? as usize;
        let mut links = Vec::with_capacity(n);
        for _ in 0..n {
            let layer_count = next()? as usize;
            if layer_count == 0 || layer_count > max_level + 1 {
                return Err(bad("layer count out of range"));
            }
            let mut layers = Vec::with_capacity(layer_count);
            for _ in 0..layer_count {
                let len = next()? as usize;
                let mut list = Vec::with_capacity(len.min(1024));
                for _ in 0..len {
                    let nb = next()?;
                    if nb as usize >= n {
                        return Err(bad("neighbor out of range"));
                    }
                    list.push(nb);
                }
                layers.push(list);
            }
            links.push(layers);
        }
        if next().is_ok() {
            return Err(bad("trailing bytes"));
        }
        if entry as usize >= n {
            return Err(bad("entry point out of range"));
        }
        Ok(Self {
            params,
            links,
            entry,
            max_level,
        })
    }
}

const GRAPH_MAGIC: &[u8; 8] = b"HQHNSWG\0";
const GRAPH_VERSION: u32 = 1;

/// Keeps a candidate only if it is closer to the base than to every
/// neighbor already kept. `candidates` must be sorted best first.
fn select_neighbors(rows: Rows<'_>, candidates: &[Scored], m: usize) -> Vec<Scored> {
    let mut kept: Vec<Scored> = Vec::with_capacity(m);
    for &c in candidates {
        if kept.len() >= m {
            break;
        }
        let row = rows.row(c.node);
        if kept.iter().all(|k| dot(row, rows.row(k.node)) < c.sim) {
            kept.push(c);
        }
    }
    kept
}

/// Generation-stamped visited set.
struct Visited {
    stamp: u32,
    marks: Vec<u32>,
}

impl Visited {
    fn new(n: usize) -> Self {
        Self {
            stamp: 0,
            marks: vec![0; n],
        }
    }

    fn reset(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.marks.fill(0);
            self.stamp = 1;
        }
    }

    fn insert(&mut self, node: u32) -> bool {
        let slot = &mut self.marks[node as usize];
        if *slot == self.stamp {
            false
        } else {
            *slot = self.stamp;
            true
        }
    }
}
