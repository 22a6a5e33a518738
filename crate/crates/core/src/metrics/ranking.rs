use rayon::prelude::*;

use crate::dataset::{InteractionStore, PoiIdx};
use crate::recommenders::RankedSlate;

/// Binary-relevance NDCG over the first `k` slate entries.
///
/// An empty `relevant` set yields 0; callers exclude such users from averages.
pub fn ndcg_at_k(slate: &[PoiIdx], relevant: &[PoiIdx], k: usize) -> f64 {
    let ideal = k.min(relevant.len());
    if ideal == 0 {
        return 0.0;
    }
    let dcg: f64 = slate
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, p)| relevant.contains(p))
        .map(|(i, _)| discount(i))
        .sum();
    let idcg: f64 = (0..ideal).map(discount).sum();
    dcg / idcg
}

/// `1 / log2(position + 1)` for a 0-based slot.
fn discount(slot: usize) -> f64 {
    1.0 / ((slot + 2) as f64).log2()
}

/// Per-user NDCG@k against the test partition; `None` for users with no test items.
pub fn user_ndcg(store: &InteractionStore, slates: &[RankedSlate], k: usize) -> Vec<Option<f64>> {
    slates
        .par_iter()
        .map(|s| {
            let test = store.test_items(s.user);
            if test.is_empty() {
                None
            } else {
                let items: Vec<PoiIdx> = s.items().collect();
                Some(ndcg_at_k(&items, test, k))
            }
        })
        .collect()
}

/// Mean over evaluated users in index order, with the evaluated count.
pub fn mean_defined(values: &[Option<f64>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for v in values.iter().flatten() {
        sum += v;
        n += 1;
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, n)
}

/// Whether slate `i` belongs to user `i` for every position.
pub(crate) fn check_alignment(slates: &[RankedSlate]) -> bool {
    slates.iter().enumerate().all(|(i, s)| s.user as usize == i)
}
