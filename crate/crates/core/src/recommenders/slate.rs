use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::dataset::{InteractionStore, PoiIdx, UserIdx};

/// Ordered top-k recommendations for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSlate {
    pub user: UserIdx,
    pub entries: Vec<(PoiIdx, f64)>,
}

impl RankedSlate {
    pub fn empty(user: UserIdx) -> Self {
        RankedSlate {
            user,
            entries: Vec::new(),
        }
    }

    pub fn items(&self) -> impl Iterator<Item = PoiIdx> + '_ {
        self.entries.iter().map(|&(p, _)| p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which of the user's known POIs are withheld from the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    /// Test-time ranking: train and validation POIs are excluded.
    #[default]
    TrainAndValidation,
    /// Model selection: only train POIs are excluded, validation POIs are targets.
    TrainOnly,
}

/// Sorted list of POIs a user must never be recommended under `mode`.
pub fn excluded_items(store: &InteractionStore, user: UserIdx, mode: Exclusion) -> Vec<PoiIdx> {
    let mut out = store.train_items(user);
    if mode == Exclusion::TrainAndValidation && store.is_split() {
        out.extend_from_slice(store.validation_items(user));
        out.sort_unstable();
    }
    out
}

/// Higher score first, then lower POI index.
fn rank_order(a: &(PoiIdx, f64), b: &(PoiIdx, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

#[derive(PartialEq)]
struct Entry(PoiIdx, f64);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // the heap top is the worst-ranked entry kept so far
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&(self.0, self.1), &(other.0, other.1))
    }
}

/// Best `k` candidates by score with ties broken by POI index; `excluded` must be sorted.
pub fn top_k(scores: &[f64], excluded: &[PoiIdx], k: usize) -> Vec<(PoiIdx, f64)> {
    let mut heap: BinaryHeap<Entry> = BinaryHeap::with_capacity(k + 1);
    let mut skip = excluded.iter().peekable();
    for (p, &s) in scores.iter().enumerate() {
        let p = p as PoiIdx;
        while skip.peek().is_some_and(|&&e| e < p) {
            skip.next();
        }
        if skip.peek() == Some(&&p) {
            continue;
        }
        if heap.len() < k {
            heap.push(Entry(p, s));
        } else if let Some(worst) = heap.peek() {
            if rank_order(&(p, s), &(worst.0, worst.1)) == Ordering::Less {
                heap.pop();
                heap.push(Entry(p, s));
            }
        }
    }
    let mut out: Vec<(PoiIdx, f64)> = heap.into_iter().map(|e| (e.0, e.1)).collect();
    out.sort_by(rank_order);
    out
}

/// Top-k slates for every user.
pub fn recommend(model: &dyn Scorer, store: &InteractionStore, k: usize, mode: Exclusion) -> Vec<RankedSlate> {
    assert!(k >= 1, "k must be at least 1");
    let slates: Vec<RankedSlate> = (0..store.n_users() as UserIdx)
        .into_par_iter()
        .map_init(
            || vec![0.0; store.n_pois()],
            |scores, u| {
                model.score_into(u, scores);
                let excluded = excluded_items(store, u, mode);
                RankedSlate {
                    user: u,
                    entries: top_k(scores, &excluded, k),
                }
            },
        )
        .collect();
    let empty = slates.iter().filter(|s| s.is_empty()).count();
    if empty > 0 {
        warn!("{}: {empty} users with an empty candidate set", model.name());
    }
    slates
}
