//! Ranking accuracy and two-sided fairness: NDCG@k, generalized cross-entropy against target
//! group distributions, MADr with its reciprocal, and trade-off areas.

mod fairness;
mod gce;
mod ranking;
mod report;

pub use fairness::{
    estimate_pm_items, estimate_pm_users, exposure_counts, fairness, group_performance, item_labels, madr,
    madr_values, tradeoff_auc, user_labels, GroupPerformance, Side, DEFAULT_EPSILON,
};
pub use gce::{gce, gce_probs, highlight, GceParams, GroupDistribution};
pub use ranking::{mean_defined, ndcg_at_k, user_ndcg};
pub use report::{
    build_report, default_item_targets, default_user_targets, evaluate_model, report_columns, FairnessReport,
    MetricParams, ModelReport,
};
