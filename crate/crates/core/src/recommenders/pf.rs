use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::factors::Factors;
use super::{FactorKind, FactorModel, Hyperparams};
use crate::dataset::{InteractionStore, UserIdx};
use crate::error::{Error, Result};

/// Users per reduction chunk. Fixed so item sums do not depend on the thread count.
const CHUNK: usize = 64;
const ELBO_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfParams {
    pub dim: usize,
    /// Gamma prior on user factors: shape `a`, rate `b`.
    pub user_shape: f64,
    pub user_rate: f64,
    /// Gamma prior on item factors: shape `c`, rate `e`.
    pub item_shape: f64,
    pub item_rate: f64,
    pub max_iterations: usize,
    /// Stop once the relative ELBO change falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PfParams {
    fn default() -> Self {
        PfParams {
            dim: 32,
            user_shape: 0.3,
            user_rate: 0.3,
            item_shape: 0.3,
            item_rate: 0.3,
            max_iterations: 100,
            tolerance: 1e-5,
            seed: 42,
        }
    }
}

/// Gamma(shape, rate) variational factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfPosterior {
    pub user_shape: Factors,
    pub user_rate: Factors,
    pub item_shape: Factors,
    pub item_rate: Factors,
}

impl PfPosterior {
    fn means(shape: &Factors, rate: &Factors) -> Factors {
        let data = shape
            .as_slice()
            .iter()
            .zip(rate.as_slice())
            .map(|(s, r)| s / r)
            .collect();
        Factors::from_vec(shape.rows(), shape.dim(), data)
    }

    fn log_means(shape: &Factors, rate: &Factors) -> Factors {
        let data = shape
            .as_slice()
            .iter()
            .zip(rate.as_slice())
            .map(|(s, r)| digamma(*s) - r.ln())
            .collect();
        Factors::from_vec(shape.rows(), shape.dim(), data)
    }

    pub fn user_means(&self) -> Factors {
        Self::means(&self.user_shape, &self.user_rate)
    }

    pub fn item_means(&self) -> Factors {
        Self::means(&self.item_shape, &self.item_rate)
    }

    /// Multinomial allocation of an observed count across the latent components.
    pub fn responsibilities(&self, user: usize, item: usize) -> Vec<f64> {
        let d = self.user_shape.dim();
        let logits: Vec<f64> = (0..d)
            .map(|k| {
                digamma(self.user_shape.row(user)[k]) - self.user_rate.row(user)[k].ln()
                    + digamma(self.item_shape.row(item)[k])
                    - self.item_rate.row(item)[k].ln()
            })
            .collect();
        softmax(&logits).1
    }
}

/// Returns (log Σ exp, normalized weights).
fn softmax(logits: &[f64]) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (max + sum.ln(), exps.into_iter().map(|e| e / sum).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfFit {
    pub model: FactorModel,
    pub posterior: PfPosterior,
    /// ELBO at initialization and after every iteration.
    pub elbo_trace: Vec<f64>,
}

/// `E[ln p(x)] − E[ln q(x)]` summed over a block of Gamma variables with a common prior.
fn gamma_kl_terms(prior_shape: f64, prior_rate: f64, shape: &Factors, rate: &Factors) -> f64 {
    let lg_prior = ln_gamma(prior_shape);
    shape
        .as_slice()
        .iter()
        .zip(rate.as_slice())
        .map(|(&s, &r)| {
            let elog = digamma(s) - r.ln();
            let mean = s / r;
            let log_p = prior_shape * prior_rate.ln() - lg_prior + (prior_shape - 1.0) * elog - prior_rate * mean;
            let log_q = s * r.ln() - ln_gamma(s) + (s - 1.0) * elog - r * mean;
            log_p - log_q
        })
        .sum()
}

struct Pass {
    user_acc: Factors,
    item_acc: Factors,
    /// Σ_obs [y · logsumexp_k(E ln θ + E ln β) − ln y!]
    data_term: f64,
}

/// Optimal multinomial allocations for the current factors, accumulated into shape statistics.
fn allocation_pass(rows: &[Vec<(usize, f64)>], elog_user: &Factors, elog_item: &Factors) -> Pass {
    let d = elog_user.dim();
    let n_items = elog_item.rows();
    let n_users = rows.len();
    let partials: Vec<(Vec<f64>, Factors, f64)> = rows
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk, block)| {
            let mut user_acc = vec![0.0; block.len() * d];
            let mut item_acc = Factors::zeros(n_items, d);
            let mut data = 0.0;
            let mut logits = vec![0.0; d];
            for (offset, row) in block.iter().enumerate() {
                let u = chunk * CHUNK + offset;
                let eu = elog_user.row(u);
                for &(i, y) in row {
                    let ei = elog_item.row(i);
                    for k in 0..d {
                        logits[k] = eu[k] + ei[k];
                    }
                    let (lse, phi) = softmax(&logits);
                    data += y * lse - ln_gamma(y + 1.0);
                    let acc_i = item_acc.row_mut(i);
                    for k in 0..d {
                        let w = y * phi[k];
                        user_acc[offset * d + k] += w;
                        acc_i[k] += w;
                    }
                }
            }
            (user_acc, item_acc, data)
        })
        .collect();

    let mut user_acc = Vec::with_capacity(n_users * d);
    let mut item_acc = Factors::zeros(n_items, d);
    let mut data_term = 0.0;
    for (u, items, data) in partials {
        user_acc.extend(u);
        for (a, b) in item_acc.as_mut_slice().iter_mut().zip(items.as_slice()) {
            *a += b;
        }
        data_term += data;
    }
    Pass {
        user_acc: Factors::from_vec(n_users, d, user_acc),
        item_acc,
        data_term,
    }
}

fn column_sums(f: &Factors) -> Vec<f64> {
    let mut sums = vec![0.0; f.dim()];
    for r in 0..f.rows() {
        for (s, v) in sums.iter_mut().zip(f.row(r)) {
            *s += v;
        }
    }
    sums
}

fn elbo(params: &PfParams, post: &PfPosterior, data_term: f64) -> f64 {
    let mean_u = column_sums(&post.user_means());
    let mean_i = column_sums(&post.item_means());
    let rate_term: f64 = mean_u.iter().zip(&mean_i).map(|(a, b)| a * b).sum();
    data_term - rate_term
        + gamma_kl_terms(params.user_shape, params.user_rate, &post.user_shape, &post.user_rate)
        + gamma_kl_terms(params.item_shape, params.item_rate, &post.item_shape, &post.item_rate)
}

/// Non-hierarchical Poisson factorization fitted by batch variational coordinate ascent.
///
/// Each iteration re-derives the multinomial allocations from the current factors, then updates
/// every user posterior, then every item posterior. With no observations at all the posterior is
/// the prior.
pub fn train_pf(store: &InteractionStore, params: &PfParams) -> Result<PfFit> {
    let rows: Vec<Vec<(usize, f64)>> = (0..store.n_users() as UserIdx)
        .map(|u| {
            store
                .train_interactions(u)
                .into_iter()
                .map(|(p, c)| (p as usize, c as f64))
                .collect()
        })
        .collect();
    train_pf_counts(store.n_pois(), &rows, params)
}

/// Fits a count matrix given as sparse user rows of `(item, count)`.
pub fn train_pf_counts(n_items: usize, rows: &[Vec<(usize, f64)>], params: &PfParams) -> Result<PfFit> {
    let priors = [params.user_shape, params.user_rate, params.item_shape, params.item_rate];
    if params.dim == 0 || priors.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidInput(format!("invalid PF hyperparameters {params:?}")));
    }
    if rows.iter().flatten().any(|&(i, y)| i >= n_items || !(y >= 0.0) || !y.is_finite()) {
        return Err(Error::InvalidInput("PF counts must be finite, non-negative and in range".into()));
    }
    let d = params.dim;
    let n_users = rows.len();
    let nnz = rows.iter().flatten().filter(|&&(_, y)| y > 0.0).count();

    let mut post = PfPosterior {
        user_shape: Factors::filled(n_users, d, params.user_shape),
        user_rate: Factors::filled(n_users, d, params.user_rate),
        item_shape: Factors::filled(n_items, d, params.item_shape),
        item_rate: Factors::filled(n_items, d, params.item_rate),
    };
    if nnz == 0 {
        info!("pf: no observations, posterior equals prior");
        return Ok(finish(post, params, Vec::new()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for v in post.user_shape.as_mut_slice() {
        *v += 0.01 * rng.gen::<f64>();
    }
    for v in post.user_rate.as_mut_slice() {
        *v += 0.01 * rng.gen::<f64>();
    }
    for v in post.item_shape.as_mut_slice() {
        *v += 0.01 * rng.gen::<f64>();
    }
    for v in post.item_rate.as_mut_slice() {
        *v += 0.01 * rng.gen::<f64>();
    }

    let mut trace = Vec::new();
    for iteration in 0..=params.max_iterations {
        let elog_u = PfPosterior::log_means(&post.user_shape, &post.user_rate);
        let elog_i = PfPosterior::log_means(&post.item_shape, &post.item_rate);
        let pass = allocation_pass(rows, &elog_u, &elog_i);

        let current = elbo(params, &post, pass.data_term);
        if let Some(&previous) = trace.last() {
            if current < previous - ELBO_SLACK * f64::max(1.0, f64::abs(previous)) {
                return Err(Error::ElboDecrease {
                    iteration,
                    previous,
                    current,
                });
            }
        }
        trace.push(current);
        debug!("pf iteration {iteration}: elbo {current}");
        if iteration == params.max_iterations {
            break;
        }
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            if ((current - prev) / prev.abs()).abs() < params.tolerance {
                break;
            }
        }

        let item_mean_sums = column_sums(&post.item_means());
        for u in 0..n_users {
            let acc = pass.user_acc.row(u);
            let shape = post.user_shape.row_mut(u);
            for k in 0..d {
                shape[k] = params.user_shape + acc[k];
            }
            let rate = post.user_rate.row_mut(u);
            for k in 0..d {
                rate[k] = params.user_rate + item_mean_sums[k];
            }
        }
        let user_mean_sums = column_sums(&post.user_means());
        for i in 0..n_items {
            let acc = pass.item_acc.row(i);
            let shape = post.item_shape.row_mut(i);
            for k in 0..d {
                shape[k] = params.item_shape + acc[k];
            }
            let rate = post.item_rate.row_mut(i);
            for k in 0..d {
                rate[k] = params.item_rate + user_mean_sums[k];
            }
        }
    }
    info!("pf: {} ELBO evaluations, final {:?}", trace.len(), trace.last());

    let fit = finish(post, params, trace);
    if !fit.model.all_finite() {
        return Err(Error::Diverged { model: "pf", step: fit.elbo_trace.len() });
    }
    Ok(fit)
}

fn finish(post: PfPosterior, params: &PfParams, elbo_trace: Vec<f64>) -> PfFit {
    PfFit {
        model: FactorModel {
            kind: FactorKind::Pf,
            user_factors: post.user_means(),
            item_factors: post.item_means(),
            item_bias: None,
            hyperparams: Hyperparams::Pf(params.clone()),
        },
        posterior: post,
        elbo_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{two_block_store, TwoBlock};

    #[test]
    fn softmax_normalizes() {
        let (lse, w) = softmax(&[1.0, 2.0, 3.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let direct = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln();
        assert!((lse - direct).abs() < 1e-12);
    }

    #[test]
    fn posterior_means_strictly_positive() {
        let store = two_block_store(&TwoBlock::default());
        let fit = train_pf(&store, &PfParams { dim: 4, max_iterations: 20, ..Default::default() }).unwrap();
        assert!(fit.model.user_factors.as_slice().iter().all(|&v| v > 0.0));
        assert!(fit.model.item_factors.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let store = two_block_store(&TwoBlock::default());
        let fit = train_pf(&store, &PfParams { dim: 5, max_iterations: 5, ..Default::default() }).unwrap();
        for u in 0..store.n_users() as UserIdx {
            for (p, _) in store.train_interactions(u) {
                let phi = fit.posterior.responsibilities(u as usize, p as usize);
                assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(phi.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_non_positive_priors() {
        let store = two_block_store(&TwoBlock::default());
        assert!(train_pf(&store, &PfParams { item_rate: 0.0, ..Default::default() }).is_err());
    }
}
