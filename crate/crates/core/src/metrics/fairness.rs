use log::warn;
use serde::{Deserialize, Serialize};

use super::gce::GroupDistribution;
use crate::profiling::{GroupScheme, ItemGroup, UserGroup};
use crate::recommenders::RankedSlate;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Item,
}

/// Per-group metric values; `None` marks an empty group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPerformance {
    pub side: Side,
    pub metric: String,
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
}

pub fn user_labels() -> Vec<String> {
    UserGroup::ALL.iter().map(|g| g.label().to_string()).collect()
}

pub fn item_labels() -> Vec<String> {
    ItemGroup::ALL.iter().map(|g| g.label().to_string()).collect()
}

/// Share of the total NDCG mass earned by each user group. Users without test items carry no
/// mass. The flag is set when no user earned anything and the uniform distribution was used.
pub fn estimate_pm_users(ndcg: &[Option<f64>], scheme: &GroupScheme) -> (GroupDistribution, bool) {
    let mut mass = [0.0; 4];
    for (u, v) in ndcg.iter().enumerate() {
        if let Some(v) = v {
            mass[scheme.user_group[u].index()] += v;
        }
    }
    GroupDistribution::from_masses(user_labels(), &mass)
}

/// Slots per item group across all slates.
pub fn exposure_counts(slates: &[RankedSlate], scheme: &GroupScheme) -> [u64; 3] {
    let mut counts = [0u64; 3];
    for s in slates {
        for p in s.items() {
            counts[scheme.item_group[p as usize].index()] += 1;
        }
    }
    counts
}

/// Smoothed exposure share of each item group.
pub fn estimate_pm_items(slates: &[RankedSlate], scheme: &GroupScheme, smoothing: f64) -> GroupDistribution {
    let counts = exposure_counts(slates, scheme);
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 + smoothing).collect();
    GroupDistribution::from_masses(item_labels(), &mass).0
}

/// User side: mean NDCG per activity group. Item side: unsmoothed exposure share per tier.
pub fn group_performance(
    side: Side,
    ndcg: &[Option<f64>],
    slates: &[RankedSlate],
    scheme: &GroupScheme,
) -> GroupPerformance {
    match side {
        Side::User => {
            let mut sum = [0.0; 4];
            let mut n = [0usize; 4];
            for (u, v) in ndcg.iter().enumerate() {
                if let Some(v) = v {
                    let g = scheme.user_group[u].index();
                    sum[g] += v;
                    n[g] += 1;
                }
            }
            GroupPerformance {
                side,
                metric: "ndcg".into(),
                labels: user_labels(),
                values: (0..4).map(|g| (n[g] > 0).then(|| sum[g] / n[g] as f64)).collect(),
            }
        }
        Side::Item => {
            let counts = exposure_counts(slates, scheme);
            let total: u64 = counts.iter().sum();
            GroupPerformance {
                side,
                metric: "exposure".into(),
                labels: item_labels(),
                values: counts
                    .iter()
                    .map(|&c| (total > 0).then(|| c as f64 / total as f64))
                    .collect(),
            }
        }
    }
}

/// Mean absolute difference over all unordered pairs of non-empty groups.
///
/// `None` when fewer than two groups have values.
pub fn madr(perf: &GroupPerformance) -> Option<f64> {
    let present: Vec<f64> = perf.values.iter().flatten().copied().collect();
    let empty = perf.values.len() - present.len();
    if empty > 0 {
        warn!("{:?} {}: {} empty group(s) left out of MADr", perf.side, perf.metric, empty);
    }
    madr_values(&present)
}

pub fn madr_values(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            sum += (values[i] - values[j]).abs();
            pairs += 1;
        }
    }
    Some(sum / pairs as f64)
}

/// `1 / (MADr + ε)`.
pub fn fairness(madr: f64, epsilon: f64) -> f64 {
    1.0 / (madr + epsilon)
}

/// Area of the right triangle under a point in a 2D trade-off plot.
pub fn tradeoff_auc(x: f64, y: f64) -> f64 {
    x * y / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(users: &[UserGroup], items: &[ItemGroup]) -> GroupScheme {
        GroupScheme {
            user_group: users.to_vec(),
            item_group: items.to_vec(),
            user_thresholds: [1, 2, 3],
            item_shares: [0.5, 0.3, 0.2],
        }
    }

    fn slate(user: u32, items: &[u32]) -> RankedSlate {
        RankedSlate {
            user,
            entries: items.iter().map(|&p| (p, 1.0)).collect(),
        }
    }

    use ItemGroup::*;
    use UserGroup::*;

    #[test]
    fn user_pm_from_ndcg_mass() {
        let s = scheme(&[VeryInactive, VeryInactive, SlightlyInactive, SlightlyActive, VeryActive], &[]);
        let ndcg = [Some(1.5), Some(0.5), Some(1.0), Some(1.0), Some(0.0)];
        let (pm, degenerate) = estimate_pm_users(&ndcg, &s);
        assert_eq!(pm.probs, vec![0.5, 0.25, 0.25, 0.0]);
        assert!(!degenerate);

        let (pm, degenerate) = estimate_pm_users(&[Some(0.0), None, Some(0.0), Some(0.0), None], &s);
        assert_eq!(pm.probs, vec![0.25; 4]);
        assert!(degenerate);

        let (pm, _) = estimate_pm_users(&[None, None, Some(0.3), None, Some(0.0)], &s);
        assert_eq!(pm.probs, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn item_pm_exposure() {
        let s = scheme(&[], &[ShortHead, ShortHead, MidTail, LongTail, LongTail]);
        let only_head = [slate(0, &[0, 1]), slate(1, &[1, 0])];
        assert_eq!(estimate_pm_items(&only_head, &s, 0.0).probs, vec![1.0, 0.0, 0.0]);
        let empties = [slate(0, &[]), slate(1, &[])];
        assert_eq!(estimate_pm_items(&empties, &s, 1.0).probs, vec![1.0 / 3.0; 3]);
        let s10 = scheme(&[], &[ShortHead, ShortHead, ShortHead, ShortHead, ShortHead, MidTail, MidTail, MidTail, LongTail, LongTail]);
        let prop = [slate(0, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9])];
        let pm = estimate_pm_items(&prop, &s10, 0.0).probs;
        assert!(pm.iter().zip([0.5, 0.3, 0.2]).all(|(a, b)| (a - b).abs() < 1e-15));
        let perf = group_performance(Side::Item, &[], &only_head, &s);
        assert_eq!(perf.values, vec![Some(1.0), Some(0.0), Some(0.0)]);
        assert!((madr(&perf).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn user_group_means() {
        let s = scheme(&[VeryInactive, SlightlyInactive, SlightlyActive, VeryActive], &[]);
        let perf = group_performance(Side::User, &[Some(1.0), Some(0.0), Some(0.0), Some(0.0)], &[], &s);
        assert_eq!(perf.values, vec![Some(1.0), Some(0.0), Some(0.0), Some(0.0)]);
        let even = group_performance(Side::User, &[Some(0.3); 4], &[], &s);
        assert_eq!(madr(&even), Some(0.0));
        let gap = group_performance(Side::User, &[Some(0.4), None, Some(0.1), None], &[], &s);
        assert_eq!(gap.values[1], None);
        assert!((madr(&gap).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn madr_examples() {
        let v = madr_values(&[0.10, 0.06, 0.02, 0.02]).unwrap();
        assert!((v - 0.28 / 6.0).abs() < 1e-15);
        assert!((v - 0.0466667).abs() < 1e-7);
        assert!((madr_values(&[0.4, 0.1]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(madr_values(&[0.4]), None);
        assert_eq!(fairness(0.0, DEFAULT_EPSILON), 1e12);
    }

    #[test]
    fn auc_examples() {
        assert!((tradeoff_auc(7.44, 1.1108) - 4.132).abs() < 5e-4);
        assert_eq!(tradeoff_auc(0.0, 5.0), 0.0);
        assert_eq!(tradeoff_auc(2.0, 3.0), 3.0);
    }

    proptest! {
        #[test]
        fn madr_translation_and_scale(v in prop::collection::vec(-5.0f64..5.0, 2..6), c in -3.0f64..3.0, a in 0.1f64..10.0) {
            let base = madr_values(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let scaled: Vec<f64> = v.iter().map(|x| x * a).collect();
            prop_assert!((madr_values(&shifted).unwrap() - base).abs() < 1e-9);
            prop_assert!((madr_values(&scaled).unwrap() - a * base).abs() < 1e-9 * a.max(1.0));
        }
    }
}
