use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::factors::{dot, Factors};
use super::{FactorKind, FactorModel, Hyperparams};
use crate::dataset::{InteractionStore, UserIdx};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmfParams {
    pub dim: usize,
    /// Confidence slope: `c_ui = 1 + alpha * count(u, i)`.
    pub alpha: f64,
    pub regularization: f64,
    pub sweeps: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for WmfParams {
    fn default() -> Self {
        WmfParams {
            dim: 32,
            alpha: 40.0,
            regularization: 0.1,
            sweeps: 15,
            init_scale: 0.01,
            seed: 42,
        }
    }
}

/// Trained model plus the objective after initialization and after every half-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct WmfFit {
    pub model: FactorModel,
    pub objective_trace: Vec<f64>,
}

/// Sparse observed rows: (column, visit count).
type Rows = Vec<Vec<(usize, f64)>>;

fn observed(store: &InteractionStore) -> (Rows, Rows) {
    let mut by_user = Vec::with_capacity(store.n_users());
    let mut by_item: Rows = vec![Vec::new(); store.n_pois()];
    for u in 0..store.n_users() as UserIdx {
        let row: Vec<(usize, f64)> = store
            .train_interactions(u)
            .into_iter()
            .map(|(p, c)| (p as usize, c as f64))
            .collect();
        for &(p, c) in &row {
            by_item[p].push((u as usize, c));
        }
        by_user.push(row);
    }
    (by_user, by_item)
}

/// `Σ_{u,i} c_ui (p_ui − x_u·y_i)² + λ(‖X‖² + ‖Y‖²)` over the full user × item grid.
pub fn wmf_objective(store: &InteractionStore, model: &FactorModel, params: &WmfParams) -> f64 {
    let (by_user, _) = observed(store);
    objective(&by_user, &model.user_factors, &model.item_factors, params)
}

fn objective(by_user: &Rows, users: &Factors, items: &Factors, params: &WmfParams) -> f64 {
    let d = users.dim();
    let gram = items.gram();
    let mut total = 0.0;
    for (u, row) in by_user.iter().enumerate() {
        let x = users.row(u);
        // Σ_i (x·y_i)² over all items = xᵀ (YᵀY) x
        let mut all = 0.0;
        for a in 0..d {
            all += x[a] * dot(&gram[a * d..(a + 1) * d], x);
        }
        let mut obs = 0.0;
        for &(i, count) in row {
            let s = dot(x, items.row(i));
            let c = 1.0 + params.alpha * count;
            obs += c * (1.0 - s) * (1.0 - s) - s * s;
        }
        total += all + obs;
    }
    total + params.regularization * (users.squared_norm() + items.squared_norm())
}

/// Solves every row of `target` against the fixed `other` side.
fn half_sweep(target: &mut Factors, other: &Factors, rows: &Rows, params: &WmfParams, side: &str) -> Result<()> {
    let d = other.dim();
    let gram = DMatrix::from_row_slice(d, d, &other.gram());
    let lambda = params.regularization;
    let alpha = params.alpha;
    let solved: Vec<Option<Vec<f64>>> = rows
        .par_iter()
        .map(|row| {
            let mut a = gram.clone();
            for k in 0..d {
                a[(k, k)] += lambda;
            }
            let mut b = DVector::zeros(d);
            for &(j, count) in row {
                let y = other.row(j);
                let c = 1.0 + alpha * count;
                for p in 0..d {
                    b[p] += c * y[p];
                    for q in 0..d {
                        a[(p, q)] += (c - 1.0) * y[p] * y[q];
                    }
                }
            }
            a.cholesky().map(|ch| ch.solve(&b).iter().copied().collect())
        })
        .collect();
    for (r, sol) in solved.into_iter().enumerate() {
        match sol {
            Some(x) => target.row_mut(r).copy_from_slice(&x),
            None => {
                debug!("wmf: singular {side} row {r}");
                return Err(Error::Singular { model: "wmf", row: r });
            }
        }
    }
    Ok(())
}

/// Confidence-weighted implicit-feedback matrix factorization by alternating least squares.
pub fn train_wmf(store: &InteractionStore, params: &WmfParams) -> Result<WmfFit> {
    if params.dim == 0 || params.alpha < 0.0 || params.regularization < 0.0 {
        return Err(Error::InvalidInput(format!("invalid WMF hyperparameters {params:?}")));
    }
    let (by_user, by_item) = observed(store);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut users = Factors::uniform(store.n_users(), params.dim, params.init_scale, &mut rng);
    let mut items = Factors::uniform(store.n_pois(), params.dim, params.init_scale, &mut rng);

    let mut trace = vec![objective(&by_user, &users, &items, params)];
    for _ in 0..params.sweeps {
        half_sweep(&mut users, &items, &by_user, params, "user")?;
        trace.push(objective(&by_user, &users, &items, params));
        half_sweep(&mut items, &users, &by_item, params, "item")?;
        trace.push(objective(&by_user, &users, &items, params));
    }
    debug!("wmf objective trace {trace:?}");

    let model = FactorModel {
        kind: FactorKind::Wmf,
        user_factors: users,
        item_factors: items,
        item_bias: None,
        hyperparams: Hyperparams::Wmf(params.clone()),
    };
    if !model.all_finite() {
        return Err(Error::Diverged { model: "wmf", step: params.sweeps });
    }
    Ok(WmfFit {
        model,
        objective_trace: trace,
    })
}
