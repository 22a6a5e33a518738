use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ecdf::Ecdf;
use crate::dataset::{InteractionStore, PoiIdx, UserIdx};
use crate::error::{Error, Result};

/// Reference sample budget, in (user, POI) evaluations, for the calibration CDF.
const REFERENCE_BUDGET: usize = 20_000_000;

/// User category affinity times POI popularity within the category, calibrated by the
/// corpus-wide empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalScorer {
    /// Per POI: (category, popularity within the category normalized by the category maximum).
    poi_terms: Vec<Vec<(usize, f64)>>,
    /// Per user: training check-ins per category normalized by the user's maximum.
    user_freq: Vec<Vec<f64>>,
    n_categories: usize,
    uncategorized: Vec<PoiIdx>,
    ecdf: Ecdf,
}

impl CategoricalScorer {
    pub fn build(store: &InteractionStore) -> Result<Self> {
        let n_categories = store.categories().ok_or(Error::MissingCategories)?.len();
        let totals = store.train_poi_totals();
        let mut cat_max = vec![0u64; n_categories];
        let mut uncategorized = Vec::new();
        for p in 0..store.n_pois() {
            let cats = &store.poi_meta(p as PoiIdx).categories;
            if cats.is_empty() {
                uncategorized.push(p as PoiIdx);
            }
            for &g in cats {
                cat_max[g as usize] = cat_max[g as usize].max(totals[p]);
            }
        }
        let poi_terms = (0..store.n_pois())
            .map(|p| {
                store
                    .poi_meta(p as PoiIdx)
                    .categories
                    .iter()
                    .map(|&g| {
                        let m = cat_max[g as usize];
                        let pop = if m == 0 { 0.0 } else { totals[p] as f64 / m as f64 };
                        (g as usize, pop)
                    })
                    .collect()
            })
            .collect();

        let user_freq = (0..store.n_users() as UserIdx)
            .into_par_iter()
            .map(|u| {
                let mut freq = vec![0.0; n_categories];
                for (p, c) in store.train_interactions(u) {
                    for &g in &store.poi_meta(p).categories {
                        freq[g as usize] += c as f64;
                    }
                }
                let max = freq.iter().copied().fold(0.0, f64::max);
                if max > 0.0 {
                    freq.iter_mut().for_each(|f| *f /= max);
                }
                freq
            })
            .collect();

        let mut scorer = CategoricalScorer {
            poi_terms,
            user_freq,
            n_categories,
            uncategorized,
            ecdf: Ecdf::default(),
        };
        let n_users = store.n_users();
        let stride = (n_users * store.n_pois()).div_ceil(REFERENCE_BUDGET).max(1);
        let reference: Vec<f64> = (0..n_users)
            .step_by(stride)
            .collect::<Vec<_>>()
            .into_par_iter()
            .flat_map_iter(|u| {
                let mut raw = vec![0.0; store.n_pois()];
                scorer.raw_into(u as UserIdx, &mut raw);
                raw.into_iter().filter(|&v| v > 0.0)
            })
            .collect();
        scorer.ecdf = Ecdf::new(reference);
        Ok(scorer)
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    /// POIs without any category; they always score 0.
    pub fn uncategorized(&self) -> &[PoiIdx] {
        &self.uncategorized
    }

    /// Whether the user has training check-ins at any categorized POI.
    pub fn has_affinity(&self, user: UserIdx) -> bool {
        self.user_freq[user as usize].iter().any(|&f| f > 0.0)
    }

    pub fn raw_into(&self, user: UserIdx, out: &mut [f64]) {
        let freq = &self.user_freq[user as usize];
        for (o, terms) in out.iter_mut().zip(&self.poi_terms) {
            *o = terms.iter().map(|&(g, pop)| freq[g] * pop).sum();
        }
    }

    pub fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        self.raw_into(user, out);
        for o in out.iter_mut() {
            *o = self.ecdf.eval(*o);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{preprocess, FilterMode, RawCheckIn, RawEvents};

    fn store(visits: &[(&str, &str)], cats: &[(&str, &str)]) -> InteractionStore {
        let mut ev = RawEvents::from_checkins(
            visits
                .iter()
                .enumerate()
                .map(|(t, &(u, p))| RawCheckIn { user: u.into(), poi: p.into(), lat: 1.0, lon: 1.0, when: t as i64 })
                .collect(),
        );
        ev.categories = Some(cats.iter().map(|&(p, g)| (p.into(), g.into())).collect());
        preprocess(&ev, 1, 1, FilterMode::SinglePass).unwrap()
    }

    #[test]
    fn requires_categories() {
        let ev = RawEvents::from_checkins(vec![RawCheckIn { user: "u".into(), poi: "p".into(), lat: 1.0, lon: 1.0, when: 0 }]);
        let st = preprocess(&ev, 1, 1, FilterMode::SinglePass).unwrap();
        assert!(matches!(CategoricalScorer::build(&st), Err(Error::MissingCategories)));
    }

    #[test]
    fn unvisited_category_and_uncategorized_score_zero() {
        let st = store(
            &[("u1", "a"), ("u1", "a"), ("u2", "b"), ("u2", "c")],
            &[("a", "food"), ("b", "bars")],
        );
        let sc = CategoricalScorer::build(&st).unwrap();
        let (b, c) = (st.pois().get("b").unwrap(), st.pois().get("c").unwrap());
        assert_eq!(sc.uncategorized(), &[c]);
        let mut out = vec![0.0; st.n_pois()];
        sc.score_into(st.users().get("u1").unwrap(), &mut out);
        assert_eq!(out[b as usize], 0.0);
        assert_eq!(out[c as usize], 0.0);
        assert!(out[st.pois().get("a").unwrap() as usize] > 0.0);
    }

    #[test]
    fn single_category_reduces_to_calibrated_popularity() {
        let visits = [("u1", "a"), ("u1", "a"), ("u1", "a"), ("u2", "b"), ("u2", "b"), ("u3", "c"), ("u3", "a")];
        let st = store(&visits, &[("a", "g"), ("b", "g"), ("c", "g")]);
        let sc = CategoricalScorer::build(&st).unwrap();
        // popularity a=4, b=2, c=1; each user has affinity 1 for the only category
        let pops = [1.0, 0.5, 0.25];
        let reference: Vec<f64> = pops.iter().cycle().take(9).copied().collect();
        let ecdf = Ecdf::new(reference);
        for u in 0..3 {
            let mut out = vec![0.0; 3];
            sc.score_into(u, &mut out);
            for (p, &pop) in pops.iter().enumerate() {
                assert_eq!(out[p], ecdf.eval(pop));
            }
        }
        assert_eq!(sc.n_categories(), 1);
    }
}
