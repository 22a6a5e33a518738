use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{CategoryIdx, IdMap, PoiIdx, RawCheckIn, RawEvents, UserIdx};

/// A check-in with densified indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckIn {
    pub user: UserIdx,
    pub poi: PoiIdx,
    pub when: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiMeta {
    pub lat: f64,
    pub lon: f64,
    pub categories: Vec<CategoryIdx>,
}

/// Partition of one user's distinct POIs by time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UserSplit {
    /// Sorted POI indices.
    pub train: Vec<PoiIdx>,
    pub validation: Vec<PoiIdx>,
    pub test: Vec<PoiIdx>,
    /// The first `train_checkins` of the user's time-ordered check-ins form the training period.
    pub train_checkins: usize,
    pub validation_checkins: usize,
    pub train_end: Option<i64>,
    pub validation_start: Option<i64>,
    pub test_start: Option<i64>,
    /// Fewer than three distinct POIs: everything kept in train.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub users: Vec<UserSplit>,
    /// Per (user, train POI) visit counts within the training period, aligned with `UserSplit::train`.
    pub train_counts: Vec<Vec<u32>>,
}

/// Counts as reported in dataset summary tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_pois: usize,
    pub n_checkins: usize,
    pub n_social_links: usize,
    pub n_categories: Option<usize>,
    density: f64,
}

impl DatasetStats {
    pub fn new(
        n_users: usize,
        n_pois: usize,
        n_checkins: usize,
        n_social_links: usize,
        n_categories: Option<usize>,
    ) -> Self {
        let cells = n_users as f64 * n_pois as f64;
        let density = if cells > 0.0 {
            n_checkins as f64 / cells
        } else {
            0.0
        };
        DatasetStats {
            n_users,
            n_pois,
            n_checkins,
            n_social_links,
            n_categories,
            density,
        }
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn checkins_per_user(&self) -> f64 {
        self.n_checkins as f64 / self.n_users as f64
    }

    pub fn checkins_per_poi(&self) -> f64 {
        self.n_checkins as f64 / self.n_pois as f64
    }
}

/// Preprocessed check-in data. Immutable once built; splits and samples produce new stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionStore {
    pub(crate) users: IdMap,
    pub(crate) pois: IdMap,
    pub(crate) categories: Option<IdMap>,
    /// Sorted by (user, when, poi).
    pub(crate) checkins: Vec<CheckIn>,
    pub(crate) user_offsets: Vec<usize>,
    /// Per user, (poi, visits) sorted by poi.
    pub(crate) counts: Vec<Vec<(PoiIdx, u32)>>,
    /// Per user, sorted friend indices.
    pub(crate) social: Vec<Vec<UserIdx>>,
    pub(crate) poi_meta: Vec<PoiMeta>,
    pub(crate) split: Option<Split>,
}

impl InteractionStore {
    /// Assembles a store from densified parts. Check-ins may arrive in any order.
    pub(crate) fn assemble(
        users: IdMap,
        pois: IdMap,
        categories: Option<IdMap>,
        mut checkins: Vec<CheckIn>,
        edges: Vec<(UserIdx, UserIdx)>,
        poi_meta: Vec<PoiMeta>,
    ) -> Self {
        let n_users = users.len();
        checkins.sort_by_key(|c| (c.user, c.when, c.poi));

        let mut user_offsets = vec![0usize; n_users + 1];
        for c in &checkins {
            user_offsets[c.user as usize + 1] += 1;
        }
        for u in 0..n_users {
            user_offsets[u + 1] += user_offsets[u];
        }

        let mut counts = vec![Vec::new(); n_users];
        for (u, row) in counts.iter_mut().enumerate() {
            let mut pois: Vec<PoiIdx> = checkins[user_offsets[u]..user_offsets[u + 1]]
                .iter()
                .map(|c| c.poi)
                .collect();
            pois.sort_unstable();
            for p in pois {
                match row.last_mut() {
                    Some((last, n)) if *last == p => *n += 1,
                    _ => row.push((p, 1)),
                }
            }
        }

        let mut social = vec![Vec::new(); n_users];
        for (a, b) in edges {
            if a != b {
                social[a as usize].push(b);
                social[b as usize].push(a);
            }
        }
        for friends in &mut social {
            friends.sort_unstable();
            friends.dedup();
        }

        InteractionStore {
            users,
            pois,
            categories,
            checkins,
            user_offsets,
            counts,
            social,
            poi_meta,
            split: None,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_pois(&self) -> usize {
        self.pois.len()
    }

    pub fn n_checkins(&self) -> usize {
        self.checkins.len()
    }

    pub fn n_social_links(&self) -> usize {
        self.social.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn users(&self) -> &IdMap {
        &self.users
    }

    pub fn pois(&self) -> &IdMap {
        &self.pois
    }

    pub fn categories(&self) -> Option<&IdMap> {
        self.categories.as_ref()
    }

    pub fn has_categories(&self) -> bool {
        self.categories.is_some()
    }

    pub fn checkins(&self) -> &[CheckIn] {
        &self.checkins
    }

    /// Time-ordered check-ins of one user.
    pub fn user_checkins(&self, user: UserIdx) -> &[CheckIn] {
        &self.checkins[self.user_range(user)]
    }

    fn user_range(&self, user: UserIdx) -> Range<usize> {
        let u = user as usize;
        self.user_offsets[u]..self.user_offsets[u + 1]
    }

    /// Distinct POIs of a user with visit counts over the whole history.
    pub fn user_counts(&self, user: UserIdx) -> &[(PoiIdx, u32)] {
        &self.counts[user as usize]
    }

    pub fn count(&self, user: UserIdx, poi: PoiIdx) -> u32 {
        let row = &self.counts[user as usize];
        row.binary_search_by_key(&poi, |&(p, _)| p)
            .map(|i| row[i].1)
            .unwrap_or(0)
    }

    pub fn friends(&self, user: UserIdx) -> &[UserIdx] {
        &self.social[user as usize]
    }

    pub fn poi_meta(&self, poi: PoiIdx) -> &PoiMeta {
        &self.poi_meta[poi as usize]
    }

    /// Total check-ins per POI over the whole history.
    pub fn poi_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_pois()];
        for c in &self.checkins {
            totals[c.poi as usize] += 1;
        }
        totals
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn is_split(&self) -> bool {
        self.split.is_some()
    }

    fn user_split(&self, user: UserIdx) -> &UserSplit {
        &self
            .split
            .as_ref()
            .expect("store has not been split")
            .users[user as usize]
    }

    /// Training POIs of a user. Before splitting, all of the user's POIs.
    pub fn train_items(&self, user: UserIdx) -> Vec<PoiIdx> {
        match &self.split {
            Some(s) => s.users[user as usize].train.clone(),
            None => self.counts[user as usize].iter().map(|&(p, _)| p).collect(),
        }
    }

    /// Training POIs with their training-period visit counts.
    pub fn train_interactions(&self, user: UserIdx) -> Vec<(PoiIdx, u32)> {
        match &self.split {
            Some(s) => s.users[user as usize]
                .train
                .iter()
                .copied()
                .zip(s.train_counts[user as usize].iter().copied())
                .collect(),
            None => self.counts[user as usize].clone(),
        }
    }

    pub fn validation_items(&self, user: UserIdx) -> &[PoiIdx] {
        &self.user_split(user).validation
    }

    pub fn test_items(&self, user: UserIdx) -> &[PoiIdx] {
        &self.user_split(user).test
    }

    /// Time-ordered training-period check-ins of a user.
    pub fn train_checkins(&self, user: UserIdx) -> &[CheckIn] {
        let all = self.user_checkins(user);
        match &self.split {
            Some(s) => &all[..s.users[user as usize].train_checkins],
            None => all,
        }
    }

    /// Number of distinct (user, train POI) pairs.
    pub fn n_train_interactions(&self) -> usize {
        (0..self.n_users() as UserIdx)
            .map(|u| match &self.split {
                Some(s) => s.users[u as usize].train.len(),
                None => self.counts[u as usize].len(),
            })
            .sum()
    }

    /// Training-period check-ins per POI.
    pub fn train_poi_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_pois()];
        for u in 0..self.n_users() as UserIdx {
            for (p, n) in self.train_interactions(u) {
                totals[p as usize] += n as u64;
            }
        }
        totals
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::new(
            self.n_users(),
            self.n_pois(),
            self.n_checkins(),
            self.n_social_links(),
            self.categories.as_ref().map(IdMap::len),
        )
    }

    /// Converts back to identifier-keyed events, dropping the split.
    pub fn to_events(&self) -> RawEvents {
        let checkins = self
            .checkins
            .iter()
            .map(|c| {
                let meta = &self.poi_meta[c.poi as usize];
                RawCheckIn {
                    user: self.users.name(c.user).to_string(),
                    poi: self.pois.name(c.poi).to_string(),
                    lat: meta.lat,
                    lon: meta.lon,
                    when: c.when,
                }
            })
            .collect();
        let mut social = Vec::new();
        for (u, friends) in self.social.iter().enumerate() {
            for &f in friends {
                if (u as UserIdx) < f {
                    social.push((
                        self.users.name(u as UserIdx).to_string(),
                        self.users.name(f).to_string(),
                    ));
                }
            }
        }
        let categories = self.categories.as_ref().map(|cats| {
            let mut pairs = Vec::new();
            for (p, meta) in self.poi_meta.iter().enumerate() {
                for &g in &meta.categories {
                    pairs.push((
                        self.pois.name(p as PoiIdx).to_string(),
                        cats.name(g).to_string(),
                    ));
                }
            }
            pairs
        });
        RawEvents {
            checkins,
            social,
            categories,
            report: Default::default(),
        }
    }
}
