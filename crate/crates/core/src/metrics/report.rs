use log::warn;
use serde::{Deserialize, Serialize};

use super::fairness::{
    estimate_pm_items, estimate_pm_users, fairness, group_performance, item_labels, madr, tradeoff_auc, user_labels,
    GroupPerformance, Side, DEFAULT_EPSILON,
};
use super::gce::{gce, highlight, GceParams, GroupDistribution};
use super::ranking::{check_alignment, mean_defined, user_ndcg};
use crate::dataset::InteractionStore;
use crate::error::{Error, Result};
use crate::profiling::GroupScheme;
use crate::recommenders::RankedSlate;

pub fn default_user_targets() -> Vec<Vec<f64>> {
    vec![
        vec![0.25, 0.25, 0.25, 0.25],
        vec![0.7, 0.1, 0.1, 0.1],
        vec![0.1, 0.7, 0.1, 0.1],
        vec![0.1, 0.1, 0.7, 0.1],
        vec![0.1, 0.1, 0.1, 0.7],
    ]
}

pub fn default_item_targets() -> Vec<Vec<f64>> {
    vec![
        vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        vec![0.7, 0.15, 0.15],
        vec![0.15, 0.7, 0.15],
        vec![0.15, 0.15, 0.7],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    pub k: usize,
    pub gce: GceParams,
    pub epsilon: f64,
    /// Multiplier on NDCG before it enters the accuracy/fairness trade-off areas.
    pub ndcg_scale: f64,
    pub user_targets: Vec<Vec<f64>>,
    pub item_targets: Vec<Vec<f64>>,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            k: 10,
            gce: GceParams::default(),
            epsilon: DEFAULT_EPSILON,
            ndcg_scale: 1.0,
            user_targets: default_user_targets(),
            item_targets: default_item_targets(),
        }
    }
}

impl MetricParams {
    /// Every problem found, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.k == 0 {
            out.push("metrics.k must be at least 1".to_string());
        }
        if let Err(e) = self.gce.validate() {
            out.push(format!("metrics.gce: {e}"));
        }
        if !(self.epsilon > 0.0) {
            out.push(format!("metrics.epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.ndcg_scale > 0.0) || !self.ndcg_scale.is_finite() {
            out.push(format!("metrics.ndcg_scale must be positive, got {}", self.ndcg_scale));
        }
        for (name, targets, labels) in [
            ("user_targets", &self.user_targets, user_labels()),
            ("item_targets", &self.item_targets, item_labels()),
        ] {
            if targets.is_empty() {
                out.push(format!("metrics.{name} must not be empty"));
            }
            for (i, t) in targets.iter().enumerate() {
                if let Err(e) = GroupDistribution::new(labels.clone(), t.clone()) {
                    out.push(format!("metrics.{name}[{i}]: {e}"));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(p.join("; ")))
        }
    }
}

/// Evaluation of one model's slates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub ndcg: f64,
    pub users_evaluated: usize,
    /// Users without test items, left out of every user-side quantity.
    pub users_without_test: usize,
    pub user_pm: GroupDistribution,
    /// No user earned any NDCG; `user_pm` fell back to uniform.
    pub user_pm_degenerate: bool,
    /// One entry per user target; `None` where the measure diverges.
    pub user_gce: Vec<Option<f64>>,
    pub user_highlight: Option<usize>,
    pub user_groups: GroupPerformance,
    pub user_madr: Option<f64>,
    pub user_fairness: Option<f64>,
    pub item_pm: GroupDistribution,
    pub item_gce: Vec<Option<f64>>,
    pub item_highlight: Option<usize>,
    pub item_groups: GroupPerformance,
    pub item_madr: Option<f64>,
    pub item_fairness: Option<f64>,
    pub auc_au: Option<f64>,
    pub auc_ai: Option<f64>,
    pub auc_ui: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub params: MetricParams,
    pub user_labels: Vec<String>,
    pub item_labels: Vec<String>,
    pub models: Vec<ModelReport>,
}

fn gce_row(model: &str, side: &str, targets: &[Vec<f64>], labels: &[String], pm: &GroupDistribution, p: &GceParams) -> Vec<Option<f64>> {
    targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pf = GroupDistribution {
                labels: labels.to_vec(),
                probs: t.clone(),
            };
            match gce(&pf, pm, p) {
                Ok(v) => Some(v),
                Err(e) => {
                    warn!("{model}: {side} GCE against target {i} is undefined: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Accuracy and two-sided fairness of one model. `slates[u]` must belong to user `u`.
pub fn evaluate_model(
    model: &str,
    store: &InteractionStore,
    scheme: &GroupScheme,
    slates: &[RankedSlate],
    params: &MetricParams,
) -> Result<ModelReport> {
    if slates.len() != store.n_users() || !check_alignment(slates) {
        return Err(Error::InvalidInput(format!(
            "{model}: expected one slate per user in index order ({} slates for {} users)",
            slates.len(),
            store.n_users()
        )));
    }
    let ndcg_u = user_ndcg(store, slates, params.k);
    let (ndcg, users_evaluated) = mean_defined(&ndcg_u);

    let (user_pm, user_pm_degenerate) = estimate_pm_users(&ndcg_u, scheme);
    let user_gce = gce_row(model, "user", &params.user_targets, &user_labels(), &user_pm, &params.gce);
    let user_groups = group_performance(Side::User, &ndcg_u, slates, scheme);
    let user_madr = madr(&user_groups);
    let user_fairness = user_madr.map(|m| fairness(m, params.epsilon));

    let item_pm = estimate_pm_items(slates, scheme, params.gce.smoothing);
    let item_gce = gce_row(model, "item", &params.item_targets, &item_labels(), &item_pm, &params.gce);
    let item_groups = group_performance(Side::Item, &ndcg_u, slates, scheme);
    let item_madr = madr(&item_groups);
    let item_fairness = item_madr.map(|m| fairness(m, params.epsilon));

    let x = ndcg * params.ndcg_scale;
    Ok(ModelReport {
        model: model.to_string(),
        ndcg,
        users_evaluated,
        users_without_test: store.n_users() - users_evaluated,
        user_highlight: highlight(&user_gce),
        item_highlight: highlight(&item_gce),
        user_pm,
        user_pm_degenerate,
        user_gce,
        user_groups,
        user_madr,
        user_fairness,
        item_pm,
        item_gce,
        item_groups,
        item_madr,
        item_fairness,
        auc_au: user_fairness.map(|f| tradeoff_auc(x, f)),
        auc_ai: item_fairness.map(|f| tradeoff_auc(x, f)),
        auc_ui: user_fairness.zip(item_fairness).map(|(a, b)| tradeoff_auc(a, b)),
    })
}

pub fn build_report(models: Vec<ModelReport>, params: &MetricParams) -> FairnessReport {
    FairnessReport {
        params: params.clone(),
        user_labels: user_labels(),
        item_labels: item_labels(),
        models,
    }
}

/// Column-oriented view of a report: name, then one value per model.
pub fn report_columns(report: &FairnessReport) -> Vec<(String, Vec<Option<f64>>)> {
    let mut cols: Vec<(String, Vec<Option<f64>>)> = Vec::new();
    let m = &report.models;
    cols.push((format!("NDCG@{}", report.params.k), m.iter().map(|r| Some(r.ndcg)).collect()));
    for i in 0..report.params.user_targets.len() {
        cols.push((format!("user GCE Pf{i}"), m.iter().map(|r| r.user_gce[i]).collect()));
    }
    cols.push(("user 1/MADr".into(), m.iter().map(|r| r.user_fairness).collect()));
    for i in 0..report.params.item_targets.len() {
        cols.push((format!("item GCE Pf{i}"), m.iter().map(|r| r.item_gce[i]).collect()));
    }
    cols.push(("item 1/MADr".into(), m.iter().map(|r| r.item_fairness).collect()));
    cols.push(("AUC_au".into(), m.iter().map(|r| r.auc_au).collect()));
    cols.push(("AUC_ai".into(), m.iter().map(|r| r.auc_ai).collect()));
    cols.push(("AUC_ui".into(), m.iter().map(|r| r.auc_ui).collect()));
    cols
}
