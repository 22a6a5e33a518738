use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ecdf::Ecdf;
use crate::dataset::{InteractionStore, PoiIdx, UserIdx};

/// Friends' training visits per POI, calibrated by the corpus-wide empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialScorer {
    /// Sparse raw scores per user, sorted by POI.
    raw: Vec<Vec<(PoiIdx, f64)>>,
    ecdf: Ecdf,
}

impl SocialScorer {
    pub fn build(store: &InteractionStore) -> Self {
        let train: Vec<Vec<(PoiIdx, u32)>> = (0..store.n_users() as UserIdx)
            .into_par_iter()
            .map(|u| store.train_interactions(u))
            .collect();
        let raw: Vec<Vec<(PoiIdx, f64)>> = (0..store.n_users() as UserIdx)
            .into_par_iter()
            .map(|u| {
                let mut acc: BTreeMap<PoiIdx, f64> = BTreeMap::new();
                for &f in store.friends(u) {
                    for &(p, c) in &train[f as usize] {
                        *acc.entry(p).or_default() += c as f64;
                    }
                }
                acc.into_iter().collect()
            })
            .collect();
        let ecdf = Ecdf::new(raw.iter().flatten().map(|&(_, s)| s).collect());
        SocialScorer { raw, ecdf }
    }

    pub fn raw(&self, user: UserIdx) -> &[(PoiIdx, f64)] {
        &self.raw[user as usize]
    }

    pub fn ecdf(&self) -> &Ecdf {
        &self.ecdf
    }

    /// Calibrated scores for every POI.
    pub fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        out.fill(0.0);
        for &(p, s) in &self.raw[user as usize] {
            out[p as usize] = self.ecdf.eval(s);
        }
    }
}
