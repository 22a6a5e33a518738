use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionStore, PoiIdx, UserIdx};

/// First-order transitions between consecutive training check-ins of the same user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    /// Row-normalized probabilities per source POI, sorted by target.
    rows: Vec<Vec<(PoiIdx, f64)>>,
    pub recency_base: f64,
}

impl TransitionModel {
    /// Counts `(from, to)` pairs from one sequence per user.
    ///
    /// Self-transitions are skipped, as are pairs further apart than `max_gap` seconds.
    pub fn from_sequences<'a, I>(n_pois: usize, sequences: I, max_gap: Option<i64>, recency_base: f64) -> Self
    where
        I: IntoIterator<Item = &'a [(PoiIdx, i64)]>,
    {
        let mut counts: Vec<BTreeMap<PoiIdx, f64>> = vec![BTreeMap::new(); n_pois];
        for seq in sequences {
            for w in seq.windows(2) {
                let ((from, t0), (to, t1)) = (w[0], w[1]);
                if from == to || max_gap.is_some_and(|g| t1 - t0 > g) {
                    continue;
                }
                *counts[from as usize].entry(to).or_default() += 1.0;
            }
        }
        Self::from_counts(counts, recency_base)
    }

    pub fn from_counts(counts: Vec<BTreeMap<PoiIdx, f64>>, recency_base: f64) -> Self {
        let rows = counts
            .into_iter()
            .map(|row| {
                let total: f64 = row.values().sum();
                row.into_iter().map(|(to, c)| (to, c / total)).collect()
            })
            .collect();
        TransitionModel { rows, recency_base }
    }

    pub fn build(store: &InteractionStore, max_gap: Option<i64>, recency_base: f64) -> Self {
        let sequences: Vec<Vec<(PoiIdx, i64)>> = (0..store.n_users() as UserIdx)
            .map(|u| history(store, u))
            .collect();
        Self::from_sequences(store.n_pois(), sequences.iter().map(Vec::as_slice), max_gap, recency_base)
    }

    pub fn probability(&self, from: PoiIdx, to: PoiIdx) -> f64 {
        let row = &self.rows[from as usize];
        row.binary_search_by_key(&to, |&(p, _)| p).map(|i| row[i].1).unwrap_or(0.0)
    }

    pub fn row(&self, from: PoiIdx) -> &[(PoiIdx, f64)] {
        &self.rows[from as usize]
    }

    /// Additive Markov chain: `Σ_t w_t · M[l_t → l]` with `w_t ∝ base^(t−n)`.
    pub fn score_into(&self, history: &[PoiIdx], out: &mut [f64]) {
        out.fill(0.0);
        let n = history.len();
        if n == 0 {
            return;
        }
        let mut weights: BTreeMap<PoiIdx, f64> = BTreeMap::new();
        let mut norm = 0.0;
        for (t, &p) in history.iter().enumerate() {
            let w = self.recency_base.powi(t as i32 + 1 - n as i32);
            norm += w;
            *weights.entry(p).or_default() += w;
        }
        for (from, w) in weights {
            for &(to, prob) in &self.rows[from as usize] {
                out[to as usize] += w / norm * prob;
            }
        }
    }
}

/// Time-ordered training POIs of a user with timestamps.
pub fn history(store: &InteractionStore, user: UserIdx) -> Vec<(PoiIdx, i64)> {
    store.train_checkins(user).iter().map(|c| (c.poi, c.when)).collect()
}
