//! Collaborative models sharing one scoring contract, and top-k slate construction.

mod bpr;
mod checkpoint;
mod external;
mod factors;
mod mostpop;
mod pf;
mod slate;
mod wmf;

use serde::{Deserialize, Serialize};

use crate::dataset::UserIdx;

pub use bpr::{train_bpr, triple_gradient, triple_objective, BprParams, TripleGradient};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use external::{import_external_rankings, write_rankings, ImportedRankings};
pub use factors::Factors;
pub use mostpop::{train_mostpop, MostPop};
pub use pf::{train_pf, train_pf_counts, PfFit, PfParams, PfPosterior};
pub use slate::{excluded_items, recommend, top_k, Exclusion, RankedSlate};
pub use wmf::{train_wmf, wmf_objective, WmfFit, WmfParams};

/// A trained model that scores every POI for a user.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// Writes one score per POI into `out`, whose length is the catalog size.
    fn score_into(&self, user: UserIdx, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Bpr,
    Wmf,
    Pf,
}

impl FactorKind {
    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Bpr => "bpr",
            FactorKind::Wmf => "wmf",
            FactorKind::Pf => "pf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Bpr(BprParams),
    Wmf(WmfParams),
    Pf(PfParams),
}

/// Latent-factor model: `score(u, i) = user_u · item_i + bias_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub kind: FactorKind,
    pub user_factors: Factors,
    pub item_factors: Factors,
    pub item_bias: Option<Vec<f64>>,
    pub hyperparams: Hyperparams,
}

impl FactorModel {
    pub fn score(&self, user: UserIdx, item: usize) -> f64 {
        let u = self.user_factors.row(user as usize);
        let v = self.item_factors.row(item);
        factors::dot(u, v) + self.item_bias.as_ref().map_or(0.0, |b| b[item])
    }

    pub fn all_finite(&self) -> bool {
        self.user_factors.all_finite()
            && self.item_factors.all_finite()
            && self
                .item_bias
                .as_ref()
                .is_none_or(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl Scorer for FactorModel {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        let u = self.user_factors.row(user as usize);
        for (i, s) in out.iter_mut().enumerate() {
            *s = factors::dot(u, self.item_factors.row(i));
        }
        if let Some(bias) = &self.item_bias {
            for (s, b) in out.iter_mut().zip(bias) {
                *s += b;
            }
        }
    }
}
