use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::factors::{dot, Factors};
use super::{FactorKind, FactorModel, Hyperparams};
use crate::dataset::{InteractionStore, PoiIdx, UserIdx};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BprParams {
    pub dim: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// SGD steps per distinct training (user, POI) pair.
    pub steps_per_interaction: usize,
    pub item_bias: bool,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for BprParams {
    fn default() -> Self {
        BprParams {
            dim: 32,
            learning_rate: 0.05,
            regularization: 0.01,
            steps_per_interaction: 30,
            item_bias: true,
            init_scale: 0.01,
            seed: 42,
        }
    }
}

/// `ln σ(x_ui − x_uj) − λ(‖u‖² + ‖v_i‖² + ‖v_j‖² + b_i² + b_j²)` for one sampled triple.
pub fn triple_objective(u: &[f64], vi: &[f64], vj: &[f64], bi: f64, bj: f64, lambda: f64) -> f64 {
    let x = dot(u, vi) - dot(u, vj) + bi - bj;
    let norms = dot(u, u) + dot(vi, vi) + dot(vj, vj) + bi * bi + bj * bj;
    ln_sigmoid(x) - lambda * norms
}

fn ln_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradient {
    pub u: Vec<f64>,
    pub vi: Vec<f64>,
    pub vj: Vec<f64>,
    pub bi: f64,
    pub bj: f64,
}

/// Analytic gradient of [`triple_objective`].
pub fn triple_gradient(u: &[f64], vi: &[f64], vj: &[f64], bi: f64, bj: f64, lambda: f64) -> TripleGradient {
    let x = dot(u, vi) - dot(u, vj) + bi - bj;
    let g = sigmoid(-x);
    TripleGradient {
        u: (0..u.len()).map(|k| g * (vi[k] - vj[k]) - 2.0 * lambda * u[k]).collect(),
        vi: (0..u.len()).map(|k| g * u[k] - 2.0 * lambda * vi[k]).collect(),
        vj: (0..u.len()).map(|k| -g * u[k] - 2.0 * lambda * vj[k]).collect(),
        bi: g - 2.0 * lambda * bi,
        bj: -g - 2.0 * lambda * bj,
    }
}

/// Pairwise ranking by stochastic gradient ascent over (user, visited, unvisited) triples.
pub fn train_bpr(store: &InteractionStore, params: &BprParams) -> Result<FactorModel> {
    if params.dim == 0 || params.learning_rate < 0.0 || params.regularization < 0.0 {
        return Err(Error::InvalidInput(format!("invalid BPR hyperparameters {params:?}")));
    }
    let n_items = store.n_pois();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut users = Factors::uniform(store.n_users(), params.dim, params.init_scale, &mut rng);
    let mut items = Factors::uniform(n_items, params.dim, params.init_scale, &mut rng);
    let mut bias = vec![0.0; n_items];

    let positives: Vec<(UserIdx, Vec<PoiIdx>)> = (0..store.n_users() as UserIdx)
        .map(|u| (u, store.train_items(u)))
        .filter(|(_, items)| !items.is_empty() && items.len() < n_items)
        .collect();
    let n_interactions = store.n_train_interactions();
    let steps = params.steps_per_interaction * n_interactions;
    info!("bpr: {steps} steps over {} users", positives.len());
    if positives.is_empty() {
        return Ok(finish(users, items, bias, params));
    }

    let lr = params.learning_rate;
    let lambda = params.regularization;
    let d = params.dim;
    let mut grad_u = vec![0.0; d];
    let mut urow = vec![0.0; d];
    for step in 0..steps {
        let (u, pos) = &positives[rng.gen_range(0..positives.len())];
        let i = pos[rng.gen_range(0..pos.len())] as usize;
        let j = loop {
            let j = rng.gen_range(0..n_items) as PoiIdx;
            if pos.binary_search(&j).is_err() {
                break j as usize;
            }
        };
        let u = *u as usize;

        let (bi, bj) = if params.item_bias { (bias[i], bias[j]) } else { (0.0, 0.0) };
        let x = dot(users.row(u), items.row(i)) - dot(users.row(u), items.row(j)) + bi - bj;
        let g = sigmoid(-x);

        {
            let uu = users.row(u);
            let (vi, vj) = (items.row(i), items.row(j));
            for k in 0..d {
                grad_u[k] = g * (vi[k] - vj[k]) - 2.0 * lambda * uu[k];
            }
        }
        urow.copy_from_slice(users.row(u));
        for (k, &uk) in urow.iter().enumerate() {
            let vi = items.row(i)[k];
            items.row_mut(i)[k] += lr * (g * uk - 2.0 * lambda * vi);
            let vj = items.row(j)[k];
            items.row_mut(j)[k] += lr * (-g * uk - 2.0 * lambda * vj);
        }
        for (w, gk) in users.row_mut(u).iter_mut().zip(&grad_u) {
            *w += lr * gk;
        }
        if params.item_bias {
            bias[i] += lr * (g - 2.0 * lambda * bi);
            bias[j] += lr * (-g - 2.0 * lambda * bj);
        }

        let touched_finite = users.row(u).iter().all(|v| v.is_finite())
            && items.row(i).iter().all(|v| v.is_finite())
            && items.row(j).iter().all(|v| v.is_finite())
            && bias[i].is_finite()
            && bias[j].is_finite();
        if !touched_finite {
            return Err(Error::Diverged { model: "bpr", step });
        }
    }
    Ok(finish(users, items, bias, params))
}

fn finish(users: Factors, items: Factors, bias: Vec<f64>, params: &BprParams) -> FactorModel {
    FactorModel {
        kind: FactorKind::Bpr,
        user_factors: users,
        item_factors: items,
        item_bias: params.item_bias.then_some(bias),
        hyperparams: Hyperparams::Bpr(params.clone()),
    }
}
