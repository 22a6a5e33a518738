use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::dataset::{InteractionStore, UserIdx};

/// Global popularity: every user gets the same training check-in counts as scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MostPop {
    pub counts: Vec<f64>,
}

pub fn train_mostpop(store: &InteractionStore) -> MostPop {
    MostPop {
        counts: store.train_poi_totals().into_iter().map(|c| c as f64).collect(),
    }
}

impl Scorer for MostPop {
    fn name(&self) -> &str {
        "mostpop"
    }

    fn score_into(&self, _user: UserIdx, out: &mut [f64]) {
        out.copy_from_slice(&self.counts);
    }
}
