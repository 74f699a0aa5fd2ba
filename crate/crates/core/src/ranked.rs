use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub id: String,
    pub score: f64,
}

impl ScoredHit {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        Self {
            id: id.into(),
            score,
        }
    }
}

/// Descending score, then ascending id.
pub fn rank_order(a: &ScoredHit, b: &ScoredHit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.id.cmp(&b.id))
}

/// `(id, score)` pairs with unique ids in non-increasing score order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    hits: Vec<ScoredHit>,
}

impl RankedList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts arbitrary hits into rank order. Ids must be unique.
    pub fn from_unsorted(mut hits: Vec<ScoredHit>) -> Self {
        hits.sort_by(rank_order);
        debug_assert!(
            {
                let mut ids: Vec<&str> = hits.iter().map(|h| h.id.as_str()).collect();
                ids.sort_unstable();
                ids.windows(2).all(|w| w[0] != w[1])
            },
            "duplicate ids in ranked list"
        );
        Self { hits }
    }

    /// Wraps hits that are already in rank order, keeping their order.
    /// Used where the ordering carries meaning beyond the scores (e.g. the
    /// tables in tests).
    pub fn from_ordered(hits: Vec<ScoredHit>) -> Self {
        Self { hits }
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self::from_ordered(
            pairs
                .into_iter()
                .map(|(id, s)| ScoredHit::new(id, s))
                .collect(),
        )
    }

    pub fn hits(&self) -> &[ScoredHit] {
        &self.hits
    }

    pub fn into_hits(self) -> Vec<ScoredHit> {
        self.hits
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.id.as_str())
    }

    pub fn score_of(&self, id: &str) -> Option<f64> {
        self.hits.iter().find(|h| h.id == id).map(|h| h.score)
    }

    pub fn truncate(&mut self, k: usize) {
        self.hits.truncate(k);
    }

    pub fn retain(&mut self, f: impl FnMut(&ScoredHit) -> bool) {
        self.hits.retain(f);
    }

    /// Scores are non-increasing and ids unique.
    pub fn is_well_formed(&self) -> bool {
        let sorted = self.hits.windows(2).all(|w| w[0].score >= w[1].score);
        let mut ids: Vec<&str> = self.ids().collect();
        ids.sort_unstable();
        sorted && ids.windows(2).all(|w| w[0] != w[1])
    }
}

impl<'a> IntoIterator for &'a RankedList {
    type Item = &'a ScoredHit;
    type IntoIter = std::slice::Iter<'a, ScoredHit>;

    fn into_iter(self) -> Self::IntoIter {
        self.hits.iter()
    }
}

/// Selects the `k` best hits in rank order without sorting everything.
pub(crate) fn top_k(mut hits: Vec<ScoredHit>, k: usize) -> Vec<ScoredHit> {
    if hits.len() > k && k > 0 {
        hits.select_nth_unstable_by(k - 1, rank_order);
        hits.truncate(k);
    }
    hits.sort_by(rank_order);
    hits.truncate(k);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_id() {
        let list = RankedList::from_unsorted(vec![
            ScoredHit::new("b", 1.0),
            ScoredHit::new("a", 1.0),
            ScoredHit::new("c", 2.0),
        ]);
        assert_eq!(list.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert!(list.is_well_formed());
    }

    #[test]
    fn top_k_matches_full_sort() {
        let hits: Vec<ScoredHit> = (0..50)
            .map(|i| ScoredHit::new(format!("d{i:02}"), ((i * 37) % 11) as f64))
            .collect();
        let mut full = hits.clone();
        full.sort_by(rank_order);
        for k in [1, 5, 11, 50, 80] {
            let got = top_k(hits.clone(), k);
            assert_eq!(got, full[..k.min(50)].to_vec());
        }
    }
}
