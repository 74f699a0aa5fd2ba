//! Score normalization and list fusion.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranked::{RankedList, ScoredHit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionStrategy {
    #[default]
    #[serde(alias = "minmax")]
    MinmaxWeighted,
    Rrf,
}

impl std::str::FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" | "minmax_weighted" => Ok(FusionStrategy::MinmaxWeighted),
            "rrf" => Ok(FusionStrategy::Rrf),
            other => Err(Error::InvalidArgument(format!("unknown fusion strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub w_lexical: f64,
    pub w_dense: f64,
    pub strategy: FusionStrategy,
    pub rrf_k: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            w_lexical: 0.5,
            w_dense: 0.5,
            strategy: FusionStrategy::MinmaxWeighted,
            rrf_k: 60.0,
        }
    }
}

impl FusionConfig {
    pub fn weighted(w_lexical: f64, w_dense: f64) -> Result<Self> {
        let cfg = Self {
            w_lexical,
            w_dense,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_lexical >= 0.0 && self.w_dense >= 0.0) {
            return Err(Error::Config("fusion weights must be non-negative".into()));
        }
        if (self.w_lexical + self.w_dense - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "fusion weights must sum to 1 (got {} + {})",
                self.w_lexical, self.w_dense
            )));
        }
        if self.rrf_k.is_nan() || self.rrf_k < 0.0 {
            return Err(Error::Config("rrf_k must be non-negative".into()));
        }
        Ok(())
    }
}

/// `(s − min) / (max − min)` over the list, order kept.
///
/// A list whose scores are all equal (including a singleton) maps to 1.0
/// everywhere.
pub fn minmax_normalize(list: &RankedList) -> RankedList {
    let hits = list.hits();
    let Some(first) = hits.first() else {
        return RankedList::new();
    };
    let (min, max) = hits
        .iter()
        .fold((first.score, first.score), |(lo, hi), h| (lo.min(h.score), hi.max(h.score)));
    let span = max - min;
    RankedList::from_ordered(
        hits.iter()
            .map(|h| {
                let s = if span > 0.0 { (h.score - min) / span } else { 1.0 };
                ScoredHit::new(h.id.clone(), s)
            })
            .collect(),
    )
}

/// Combines two lists with the configured strategy.
pub fn fuse(lexical: &RankedList, dense: &RankedList, config: &FusionConfig) -> RankedList {
    match config.strategy {
        FusionStrategy::MinmaxWeighted => fuse_minmax(lexical, dense, config.w_lexical, config.w_dense),
        FusionStrategy::Rrf => rrf_fuse(&[lexical, dense], config.rrf_k),
    }
}

/// Weighted sum of independently min-max normalized scores; an item missing
/// from one side contributes 0 from that side.
pub fn fuse_minmax(lexical: &RankedList, dense: &RankedList, w_lexical: f64, w_dense: f64) -> RankedList {
    let lex = minmax_normalize(lexical);
    let den = minmax_normalize(dense);
    let mut scores: HashMap<&str, (f64, f64)> = HashMap::new();
    for h in &lex {
        scores.entry(h.id.as_str()).or_default().0 = h.score;
    }
    for h in &den {
        scores.entry(h.id.as_str()).or_default().1 = h.score;
    }
    RankedList::from_unsorted(
        scores
            .into_iter()
            .map(|(id, (l, d))| ScoredHit::new(id, w_lexical * l + w_dense * d))
            .collect(),
    )
}

/// Reciprocal rank fusion: `Σ 1 / (rrf_k + rank)` with 1-based ranks.
pub fn rrf_fuse(lists: &[&RankedList], rrf_k: f64) -> RankedList {
    let mut scores: HashMap<&str, f64> = HashMap::new();
    for list in lists {
        for (rank, h) in list.hits().iter().enumerate() {
            *scores.entry(h.id.as_str()).or_insert(0.0) += 1.0 / (rrf_k + (rank + 1) as f64);
        }
    }
    RankedList::from_unsorted(
        scores
            .into_iter()
            .map(|(id, s)| ScoredHit::new(id, s))
            .collect(),
    )
}

/// Maps a chunk ranking onto articles. Each article takes the position and
/// score of its first (best) chunk.
pub fn chunks_to_articles(ranked_chunks: &RankedList, provenance: &HashMap<String, String>) -> Result<RankedList> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for h in ranked_chunks {
        let article = provenance
            .get(&h.id)
            .ok_or_else(|| Error::UnknownChunk(h.id.clone()))?;
        if seen.insert(article.as_str()) {
            out.push(ScoredHit::new(article.clone(), h.score));
        }
    }
    Ok(RankedList::from_ordered(out))
}

/// Merges the result lists of a decomposed query: each list is min-max
/// normalized, then every item keeps its best normalized score.
pub fn merge_subquery_results(lists: &[RankedList]) -> RankedList {
    let mut best: HashMap<String, f64> = HashMap::new();
    for list in lists {
        for h in &minmax_normalize(list) {
            let slot = best.entry(h.id.clone()).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(h.score);
        }
    }
    RankedList::from_unsorted(best.into_iter().map(|(id, s)| ScoredHit::new(id, s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn keyword_row() -> RankedList {
        RankedList::from_pairs([("1", 5.0), ("0", 2.6), ("2", 2.3), ("4", 0.2), ("3", 0.09)])
    }

    fn vector_row() -> RankedList {
        RankedList::from_pairs([("2", 0.6), ("4", 0.598), ("0", 0.596), ("1", 0.594), ("3", 0.009)])
    }

    fn pairs(list: &RankedList) -> Vec<(&str, f64)> {
        list.hits().iter().map(|h| (h.id.as_str(), h.score)).collect()
    }

    #[test]
    fn keyword_row_normalization() {
        let n = minmax_normalize(&keyword_row());
        let expected = [("1", 1.0), ("0", 0.511), ("2", 0.450), ("4", 0.022), ("3", 0.0)];
        for ((id, s), (eid, es)) in pairs(&n).into_iter().zip(expected) {
            assert_eq!(id, eid);
            assert!((s - es).abs() < 5e-4, "{id}: {s}");
        }
    }

    #[test]
    fn vector_row_normalization() {
        let n = minmax_normalize(&vector_row());
        let expected = [("2", 1.0), ("4", 0.99662), ("0", 0.99323), ("1", 0.98985), ("3", 0.0)];
        for ((id, s), (eid, es)) in pairs(&n).into_iter().zip(expected) {
            assert_eq!(id, eid);
            assert!((s - es).abs() < 1e-5, "{id}: {s}");
        }
    }

    #[test]
    fn degenerate_normalization() {
        let uniform = RankedList::from_pairs([("a", 2.0), ("b", 2.0), ("c", 2.0)]);
        assert!(minmax_normalize(&uniform).hits().iter().all(|h| h.score == 1.0));
        let single = RankedList::from_pairs([("a", 0.3)]);
        assert_eq!(minmax_normalize(&single).hits()[0].score, 1.0);
        assert!(minmax_normalize(&RankedList::new()).is_empty());
    }

    #[test]
    fn fused_table_order() {
        let fused = fuse(&keyword_row(), &vector_row(), &FusionConfig::default());
        assert_eq!(fused.ids().collect::<Vec<_>>(), ["1", "0", "2", "4", "3"]);
        let expected = [0.99492, 0.75222, 0.72505, 0.50951, 0.0];
        for (h, e) in fused.hits().iter().zip(expected) {
            assert!((h.score - e).abs() < 1e-5);
        }
    }

    #[test]
    fn missing_side_counts_zero() {
        let lex = RankedList::from_pairs([("x", 3.0), ("z", 1.5), ("y", 1.0)]);
        let dense = RankedList::from_pairs([("x", 0.9), ("y", 0.1)]);
        let fused = fuse(&lex, &dense, &FusionConfig::default());
        let z_norm = minmax_normalize(&lex).score_of("z").unwrap();
        assert!((fused.score_of("z").unwrap() - 0.5 * z_norm).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_keep_order() {
        let list = RankedList::from_pairs([("c", 9.0), ("a", 5.0), ("b", 1.0)]);
        let fused = fuse(&list, &list, &FusionConfig::default());
        assert_eq!(fused.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert!(fuse(&RankedList::new(), &RankedList::new(), &FusionConfig::default()).is_empty());
    }

    #[test]
    fn rrf_basics() {
        let list = RankedList::from_pairs([("c", 9.0), ("a", 5.0), ("b", 1.0)]);
        assert_eq!(rrf_fuse(&[&list], 60.0).ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        let top = rrf_fuse(&[&list, &list], 60.0);
        assert!((top.score_of("c").unwrap() - 2.0 / 61.0).abs() < 1e-15);
    }

    #[test]
    fn rrf_on_table_lists() {
        // brute-force reciprocal-rank sums
        let kw = ["1", "0", "2", "4", "3"];
        let vec = ["2", "4", "0", "1", "3"];
        let mut oracle: Vec<(&str, f64)> = ["0", "1", "2", "3", "4"]
            .iter()
            .map(|id| {
                let r1 = kw.iter().position(|x| x == id).unwrap() + 1;
                let r2 = vec.iter().position(|x| x == id).unwrap() + 1;
                (*id, 1.0 / (60.0 + r1 as f64) + 1.0 / (60.0 + r2 as f64))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(b.0)));
        let got = rrf_fuse(&[&keyword_row(), &vector_row()], 60.0);
        assert_eq!(got.ids().collect::<Vec<_>>(), oracle.iter().map(|x| x.0).collect::<Vec<_>>());
        assert_eq!(got.ids().collect::<Vec<_>>(), ["2", "1", "0", "4", "3"]);
    }

    #[test]
    fn article_track_back() {
        let chunks = RankedList::from_pairs([("chunk_A", 0.9), ("chunk_B", 0.8), ("chunk_C", 0.7), ("chunk_D", 0.6)]);
        let prov: HashMap<String, String> = [
            ("chunk_A", "article_1"),
            ("chunk_B", "article_3"),
            ("chunk_C", "article_1"),
            ("chunk_D", "article_2"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_owned(), b.to_owned()))
        .collect();
        let arts = chunks_to_articles(&chunks, &prov).unwrap();
        assert_eq!(arts.ids().collect::<Vec<_>>(), ["article_1", "article_3", "article_2"]);
        assert_eq!(arts.score_of("article_1"), Some(0.9));

        let unknown = RankedList::from_pairs([("chunk_X", 1.0)]);
        assert!(matches!(chunks_to_articles(&unknown, &prov), Err(Error::UnknownChunk(_))));
    }

    #[test]
    fn single_article_and_identity() {
        let prov: HashMap<String, String> =
            [("a", "x"), ("b", "x"), ("c", "y")].into_iter().map(|(a, b)| (a.into(), b.into())).collect();
        let same = RankedList::from_pairs([("a", 1.0), ("b", 0.5)]);
        assert_eq!(chunks_to_articles(&same, &prov).unwrap().len(), 1);
        let distinct = RankedList::from_pairs([("c", 1.0), ("a", 0.5)]);
        assert_eq!(chunks_to_articles(&distinct, &prov).unwrap().ids().collect::<Vec<_>>(), ["y", "x"]);
    }

    #[test]
    fn merge_subqueries() {
        let one = RankedList::from_pairs([("a", 4.0), ("b", 2.0), ("c", 0.0)]);
        assert_eq!(merge_subquery_results(std::slice::from_ref(&one)), minmax_normalize(&one));

        let disjoint = RankedList::from_pairs([("x", 10.0), ("y", 5.0)]);
        let merged = merge_subquery_results(&[one.clone(), disjoint]);
        assert_eq!(merged.len(), 5);
        assert_eq!(merged.score_of("y"), Some(0.0));
        assert_eq!(merged.score_of("b"), Some(0.5));

        // overlapping: enumerate items and take the per-item max by hand
        let two = RankedList::from_pairs([("c", 8.0), ("b", 6.0), ("d", 0.0)]);
        // one: a=1, b=0.5, c=0; two: c=1, b=0.75, d=0
        let merged = merge_subquery_results(&[one, two]);
        assert_eq!(pairs(&merged), vec![("a", 1.0), ("c", 1.0), ("b", 0.75), ("d", 0.0)]);
    }

    #[test]
    fn weights_validated() {
        assert!(FusionConfig::weighted(0.3, 0.7).is_ok());
        assert!(FusionConfig::weighted(0.6, 0.6).is_err());
        assert!(FusionConfig::weighted(-0.5, 1.5).is_err());
    }

    fn arb_list(prefix: &'static str) -> impl Strategy<Value = RankedList> {
        proptest::collection::btree_map(0u8..20, 0.0f64..100.0, 1..15).prop_map(move |m| {
            RankedList::from_unsorted(m.into_iter().map(|(k, s)| ScoredHit::new(format!("{prefix}{k}"), s)).collect())
        })
    }

    proptest! {
        #[test]
        fn normalization_preserves_order(list in arb_list("i")) {
            let n = minmax_normalize(&list);
            for (a, b) in list.hits().iter().zip(n.hits()) {
                prop_assert_eq!(&a.id, &b.id);
                prop_assert!((0.0..=1.0).contains(&b.score));
            }
            for i in 0..list.len() {
                for j in 0..list.len() {
                    if list.hits()[i].score > list.hits()[j].score {
                        prop_assert!(n.hits()[i].score > n.hits()[j].score);
                    }
                }
            }
        }

        #[test]
        fn one_sided_weights_reproduce_input(lex in arb_list("i"), dense in arb_list("i")) {
            for (w_lex, side) in [(1.0, &lex), (0.0, &dense)] {
                let fused = fuse_minmax(&lex, &dense, w_lex, 1.0 - w_lex);
                let mut expected = minmax_normalize(side).into_hits();
                expected.sort_by(crate::ranked::rank_order);
                let got: Vec<(String, f64)> = fused
                    .hits()
                    .iter()
                    .filter(|h| side.score_of(&h.id).is_some())
                    .map(|h| (h.id.clone(), h.score))
                    .collect();
                let want: Vec<(String, f64)> = expected.into_iter().map(|h| (h.id, h.score)).collect();
                prop_assert_eq!(got, want);
            }
        }

        #[test]
        fn shared_top_item_stays_first(lex in arb_list("i"), dense in arb_list("i"), w in 0.0f64..=1.0) {
            // force a common strict leader
            let mut l = lex.into_hits();
            let mut d = dense.into_hits();
            l.retain(|h| h.id != "top");
            d.retain(|h| h.id != "top");
            l.insert(0, ScoredHit::new("top", 1000.0));
            d.insert(0, ScoredHit::new("top", 1000.0));
            let fused = fuse_minmax(&RankedList::from_ordered(l), &RankedList::from_ordered(d), w, 1.0 - w);
            prop_assert_eq!(fused.hits()[0].id.as_str(), "top");
        }

        #[test]
        fn rrf_ignores_monotone_rescaling(a in arb_list("i"), b in arb_list("i")) {
            let rescale = |l: &RankedList| RankedList::from_ordered(
                l.hits().iter().map(|h| ScoredHit::new(h.id.clone(), (h.score * 3.0 + 1.0).exp().ln())).collect());
            let before = rrf_fuse(&[&a, &b], 60.0);
            let after = rrf_fuse(&[&rescale(&a), &rescale(&b)], 60.0);
            prop_assert_eq!(before, after);
        }

        #[test]
        fn track_back_keeps_first_occurrence(assign in proptest::collection::vec(0u8..6, 1..30)) {
            let chunks = RankedList::from_ordered(
                assign.iter().enumerate().map(|(i, _)| ScoredHit::new(format!("c{i:02}"), 100.0 - i as f64)).collect());
            let prov: HashMap<String, String> = assign.iter().enumerate()
                .map(|(i, a)| (format!("c{i:02}"), format!("art{a}"))).collect();
            let arts = chunks_to_articles(&chunks, &prov).unwrap();
            let mut first = Vec::new();
            for a in &assign {
                let id = format!("art{a}");
                if !first.contains(&id) { first.push(id); }
            }
            prop_assert_eq!(arts.ids().map(String::from).collect::<Vec<_>>(), first);
        }
    }
}
