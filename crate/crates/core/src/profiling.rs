//! User-activity and item-popularity groups, and the data-bias analyses built on them.

use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{compare_ids, InteractionStore, PoiIdx, UserIdx};
use crate::error::{Error, Result};

/// Default Gowalla user-activity boundaries (check-in counts).
pub const GOWALLA_USER_THRESHOLDS: [u64; 3] = [19, 47, 94];
/// Default Yelp user-activity boundaries (check-in counts).
pub const YELP_USER_THRESHOLDS: [u64; 3] = [51, 128, 256];
pub const DEFAULT_ITEM_SHARES: [f64; 3] = [0.5, 0.3, 0.2];

/// Share of a profile that must fall outside the short head to count as "unpopular-leaning".
pub const UNPOPULAR_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserGroup {
    VeryInactive,
    SlightlyInactive,
    SlightlyActive,
    VeryActive,
}

impl UserGroup {
    pub const ALL: [UserGroup; 4] = [
        UserGroup::VeryInactive,
        UserGroup::SlightlyInactive,
        UserGroup::SlightlyActive,
        UserGroup::VeryActive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            UserGroup::VeryInactive => "very-inactive",
            UserGroup::SlightlyInactive => "slightly-inactive",
            UserGroup::SlightlyActive => "slightly-active",
            UserGroup::VeryActive => "very-active",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemGroup {
    ShortHead,
    MidTail,
    LongTail,
}

impl ItemGroup {
    pub const ALL: [ItemGroup; 3] = [ItemGroup::ShortHead, ItemGroup::MidTail, ItemGroup::LongTail];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            ItemGroup::ShortHead => "short-head",
            ItemGroup::MidTail => "mid-tail",
            ItemGroup::LongTail => "long-tail",
        }
    }
}

impl fmt::Display for UserGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for ItemGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Group membership for every user and every POI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScheme {
    pub user_group: Vec<UserGroup>,
    pub item_group: Vec<ItemGroup>,
    pub user_thresholds: [u64; 3],
    pub item_shares: [f64; 3],
}

impl GroupScheme {
    pub fn build(store: &InteractionStore, user_thresholds: [u64; 3], item_shares: [f64; 3]) -> Result<Self> {
        Ok(GroupScheme {
            user_group: segment_users(store, user_thresholds)?,
            item_group: segment_items(store, item_shares)?,
            user_thresholds,
            item_shares,
        })
    }

    pub fn user_group_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for g in &self.user_group {
            sizes[g.index()] += 1;
        }
        sizes
    }

    pub fn item_group_sizes(&self) -> [usize; 3] {
        let mut sizes = [0; 3];
        for g in &self.item_group {
            sizes[g.index()] += 1;
        }
        sizes
    }

    pub fn is_short_head(&self, poi: PoiIdx) -> bool {
        self.item_group[poi as usize] == ItemGroup::ShortHead
    }
}

/// Greedy long-tail segmentation by check-in mass.
///
/// Items are ranked by descending total check-ins (ties by identifier). The short head is the
/// smallest prefix reaching `shares[0]` of all check-ins; the mid tail extends it until
/// `shares[0] + shares[1]`; the rest is long tail. The item crossing a boundary joins the group
/// being filled.
pub fn segment_items(store: &InteractionStore, shares: [f64; 3]) -> Result<Vec<ItemGroup>> {
    if shares.iter().any(|&s| s <= 0.0) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "item shares must be positive and sum to 1, got {shares:?}"
        )));
    }
    if store.n_pois() == 0 {
        return Err(Error::InvalidInput("empty catalog".into()));
    }
    let totals = store.poi_totals();
    Ok(segment_counts(&totals, |a, b| {
        compare_ids(store.pois().name(a), store.pois().name(b))
    }, shares))
}

pub(crate) fn segment_counts(
    totals: &[u64],
    tie: impl Fn(PoiIdx, PoiIdx) -> std::cmp::Ordering,
    shares: [f64; 3],
) -> Vec<ItemGroup> {
    let mut order: Vec<PoiIdx> = (0..totals.len() as PoiIdx).collect();
    order.sort_by(|&a, &b| {
        totals[b as usize]
            .cmp(&totals[a as usize])
            .then_with(|| tie(a, b))
    });
    let mass: u64 = totals.iter().sum();
    let head_cut = shares[0];
    let mid_cut = shares[0] + shares[1];
    const SLACK: f64 = 1e-12;

    let mut groups = vec![ItemGroup::LongTail; totals.len()];
    let mut cumulative = 0u64;
    let mut current = ItemGroup::ShortHead;
    for p in order {
        let share_before = if mass == 0 { 1.0 } else { cumulative as f64 / mass as f64 };
        if current == ItemGroup::ShortHead && share_before >= head_cut - SLACK {
            current = ItemGroup::MidTail;
        }
        if current == ItemGroup::MidTail && share_before >= mid_cut - SLACK {
            current = ItemGroup::LongTail;
        }
        groups[p as usize] = current;
        cumulative += totals[p as usize];
    }
    groups
}

/// Activity group by total check-in count against three increasing boundaries.
pub fn segment_users(store: &InteractionStore, thresholds: [u64; 3]) -> Result<Vec<UserGroup>> {
    if !(thresholds[0] < thresholds[1] && thresholds[1] < thresholds[2]) {
        return Err(Error::InvalidInput(format!(
            "user thresholds must be strictly increasing, got {thresholds:?}"
        )));
    }
    Ok((0..store.n_users() as UserIdx)
        .map(|u| user_group_for(store.user_checkins(u).len() as u64, thresholds))
        .collect())
}

pub fn user_group_for(n: u64, t: [u64; 3]) -> UserGroup {
    if n < t[0] {
        UserGroup::VeryInactive
    } else if n < t[1] {
        UserGroup::SlightlyInactive
    } else if n < t[2] {
        UserGroup::SlightlyActive
    } else {
        UserGroup::VeryActive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user: UserIdx,
    pub group: UserGroup,
    pub checkins: usize,
    /// Distinct POIs in the profile.
    pub size: usize,
    /// Distinct short-head POIs in the profile.
    pub popular: usize,
    /// Mean total check-in count of the profile's POIs.
    pub mean_popularity: f64,
}

impl UserProfile {
    pub fn unpopular_share(&self) -> f64 {
        if self.size == 0 {
            0.0
        } else {
            (self.size - self.popular) as f64 / self.size as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub profiles: Vec<UserProfile>,
    /// `None` when either variable has zero variance.
    pub r_size_popular: Option<f64>,
    pub r_size_mean_popularity: Option<f64>,
    /// Users whose profile holds at least 20% non-short-head POIs.
    pub users_with_unpopular: usize,
}

/// Popular-item share and popularity correlations over the full (unsplit) history.
pub fn profile_popularity(store: &InteractionStore, scheme: &GroupScheme) -> ProfileStats {
    let totals = store.poi_totals();
    let profiles: Vec<UserProfile> = (0..store.n_users() as UserIdx)
        .map(|u| {
            let row = store.user_counts(u);
            let popular = row.iter().filter(|&&(p, _)| scheme.is_short_head(p)).count();
            let mean_popularity = if row.is_empty() {
                0.0
            } else {
                row.iter().map(|&(p, _)| totals[p as usize] as f64).sum::<f64>() / row.len() as f64
            };
            UserProfile {
                user: u,
                group: scheme.user_group[u as usize],
                checkins: store.user_checkins(u).len(),
                size: row.len(),
                popular,
                mean_popularity,
            }
        })
        .collect();

    let size: Vec<f64> = profiles.iter().map(|p| p.size as f64).collect();
    let popular: Vec<f64> = profiles.iter().map(|p| p.popular as f64).collect();
    let mean_pop: Vec<f64> = profiles.iter().map(|p| p.mean_popularity).collect();
    let users_with_unpopular = profiles
        .iter()
        .filter(|p| p.unpopular_share() >= UNPOPULAR_SHARE - 1e-12)
        .count();

    ProfileStats {
        r_size_popular: pearson(&size, &popular),
        r_size_mean_popularity: pearson(&size, &mean_pop),
        profiles,
        users_with_unpopular,
    }
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// (1-based rank, check-in count) in descending count order.
pub fn longtail_curve(store: &InteractionStore) -> Vec<(usize, u64)> {
    let mut totals = store.poi_totals();
    totals.sort_by_key(|&c| Reverse(c));
    totals.into_iter().enumerate().map(|(i, c)| (i + 1, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{preprocess, FilterMode, RawCheckIn, RawEvents};

    /// One user per visit; POI `i{k}` gets `counts[k]` check-ins.
    fn store_with_counts(counts: &[usize]) -> InteractionStore {
        let mut checkins = Vec::new();
        let mut t = 1;
        for (k, &c) in counts.iter().enumerate() {
            for v in 0..c {
                checkins.push(RawCheckIn {
                    user: format!("u{v}"),
                    poi: format!("item{}", k + 1),
                    lat: 0.0,
                    lon: 0.0,
                    when: t,
                });
                t += 1;
            }
        }
        preprocess(&RawEvents::from_checkins(checkins), 1, 1, FilterMode::SinglePass).unwrap()
    }

    fn groups_by_name(store: &InteractionStore, groups: &[ItemGroup], g: ItemGroup) -> Vec<String> {
        let mut v: Vec<String> = (0..store.n_pois() as u32)
            .filter(|&p| groups[p as usize] == g)
            .map(|p| store.pois().name(p).to_string())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn greedy_segmentation_hand_trace() {
        let store = store_with_counts(&[10, 5, 3, 1, 1]);
        let groups = segment_items(&store, DEFAULT_ITEM_SHARES).unwrap();
        assert_eq!(groups_by_name(&store, &groups, ItemGroup::ShortHead), ["item1"]);
        assert_eq!(groups_by_name(&store, &groups, ItemGroup::MidTail), ["item2", "item3"]);
        assert_eq!(groups_by_name(&store, &groups, ItemGroup::LongTail), ["item4", "item5"]);
    }

    #[test]
    fn uniform_mass_head_is_first_half() {
        let groups = segment_counts(&[4; 10], |a, b| a.cmp(&b), DEFAULT_ITEM_SHARES);
        assert!(groups[..5].iter().all(|&g| g == ItemGroup::ShortHead));
        assert!(groups[5..8].iter().all(|&g| g == ItemGroup::MidTail));
        assert!(groups[8..].iter().all(|&g| g == ItemGroup::LongTail));
    }

    #[test]
    fn bad_shares_rejected() {
        let store = store_with_counts(&[1, 2]);
        assert!(segment_items(&store, [0.5, 0.3, 0.3]).is_err());
        assert!(segment_items(&store, [0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn user_thresholds() {
        let t = GOWALLA_USER_THRESHOLDS;
        assert_eq!(user_group_for(18, t), UserGroup::VeryInactive);
        assert_eq!(user_group_for(19, t), UserGroup::SlightlyInactive);
        assert_eq!(user_group_for(47, t), UserGroup::SlightlyActive);
        assert_eq!(user_group_for(94, t), UserGroup::VeryActive);
        let store = store_with_counts(&[3, 3]);
        let g = segment_users(&store, [5, 6, 7]).unwrap();
        assert!(g.iter().all(|&x| x == UserGroup::VeryInactive));
        assert!(segment_users(&store, [5, 5, 7]).is_err());
    }

    #[test]
    fn pearson_edge_cases() {
        let size = [2.0, 4.0, 6.0, 8.0];
        let half: Vec<f64> = size.iter().map(|s| s / 2.0).collect();
        assert!((pearson(&size, &half).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&size, &[1.0; 4]), None);
        assert_eq!(pearson(&[1.0], &[2.0]), None);
    }

    #[test]
    fn longtail_curve_contract() {
        let store = store_with_counts(&[1, 3]);
        assert_eq!(longtail_curve(&store), vec![(1, 3), (2, 1)]);
        let store = store_with_counts(&[2, 7, 1, 7, 3]);
        let curve = longtail_curve(&store);
        assert!(curve.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(curve.iter().map(|c| c.1).sum::<u64>() as usize, store.stats().n_checkins);
    }

    #[test]
    fn profile_counts_short_head() {
        let store = store_with_counts(&[10, 5, 3, 1, 1]);
        let scheme = GroupScheme::build(&store, [2, 3, 4], DEFAULT_ITEM_SHARES).unwrap();
        let stats = profile_popularity(&store, &scheme);
        // u0 visits all five items; only item1 is short head
        let u0 = &stats.profiles[store.users().get("u0").unwrap() as usize];
        assert_eq!(u0.size, 5);
        assert_eq!(u0.popular, 1);
        assert!((u0.mean_popularity - 4.0).abs() < 1e-12);
        assert!(stats.profiles.iter().all(|p| p.popular <= p.size));
        assert_eq!(scheme.user_group_sizes().iter().sum::<usize>(), store.n_users());
    }
}
