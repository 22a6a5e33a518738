use log::warn;
use serde::{Deserialize, Serialize};

use super::{InteractionStore, PoiIdx, Split, UserSplit};
use crate::error::{Error, Result};

/// Absorbs binary rounding in products like `0.7 * 10`.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            valid: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn test(&self) -> f64 {
        1.0 - self.train - self.valid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train > 0.0 && self.valid > 0.0 && self.train + self.valid < 1.0) {
            return Err(Error::InvalidInput(format!(
                "split fractions must be positive with train + valid < 1, got {} / {}",
                self.train, self.valid
            )));
        }
        Ok(())
    }

    /// (train, validation, test) check-in counts for a user with `n` check-ins.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_train = ((self.train * n as f64) - ROUNDING_SLACK).ceil().max(0.0) as usize;
        let n_test = ((self.test() * n as f64) + ROUNDING_SLACK).floor() as usize;
        let n_train = n_train.min(n);
        let n_test = n_test.min(n - n_train);
        (n_train, n - n_train - n_test, n_test)
    }
}

/// Per-user temporal split: the earliest check-ins go to train, the most recent to test.
///
/// A POI seen in several periods belongs to the period of its earliest check-in.
pub fn temporal_split(store: &InteractionStore, fractions: SplitFractions) -> Result<InteractionStore> {
    fractions.validate()?;
    let mut users = Vec::with_capacity(store.n_users());
    let mut train_counts = Vec::with_capacity(store.n_users());
    let mut flagged = 0usize;

    for u in 0..store.n_users() as u32 {
        let checkins = store.user_checkins(u);
        let n = checkins.len();
        let distinct = store.user_counts(u).len();

        let mut split = UserSplit::default();
        if distinct < 3 {
            flagged += 1;
            split.flagged = true;
            split.train = store.user_counts(u).iter().map(|&(p, _)| p).collect();
            split.train_checkins = n;
            split.train_end = checkins.last().map(|c| c.when);
            train_counts.push(store.user_counts(u).iter().map(|&(_, c)| c).collect());
            users.push(split);
            continue;
        }

        let (n_train, n_valid, _) = fractions.sizes(n);
        let (train, rest) = checkins.split_at(n_train);
        let (valid, test) = rest.split_at(n_valid);

        let mut train_pois: Vec<(PoiIdx, u32)> = Vec::new();
        let mut sorted: Vec<PoiIdx> = train.iter().map(|c| c.poi).collect();
        sorted.sort_unstable();
        for p in sorted {
            match train_pois.last_mut() {
                Some((last, n)) if *last == p => *n += 1,
                _ => train_pois.push((p, 1)),
            }
        }
        let in_train = |p: &PoiIdx| train_pois.binary_search_by_key(p, |&(q, _)| q).is_ok();

        let mut validation: Vec<PoiIdx> = valid.iter().map(|c| c.poi).filter(|p| !in_train(p)).collect();
        validation.sort_unstable();
        validation.dedup();
        let mut test_pois: Vec<PoiIdx> = test
            .iter()
            .map(|c| c.poi)
            .filter(|p| !in_train(p) && validation.binary_search(p).is_err())
            .collect();
        test_pois.sort_unstable();
        test_pois.dedup();

        split.train = train_pois.iter().map(|&(p, _)| p).collect();
        split.validation = validation;
        split.test = test_pois;
        split.train_checkins = n_train;
        split.validation_checkins = n_valid;
        split.train_end = train.last().map(|c| c.when);
        split.validation_start = valid.first().map(|c| c.when);
        split.test_start = test.first().map(|c| c.when);
        train_counts.push(train_pois.iter().map(|&(_, c)| c).collect());
        users.push(split);
    }

    if flagged > 0 {
        warn!("temporal split: {flagged} users with fewer than 3 distinct POIs kept in train only");
    }

    let mut out = store.clone();
    out.split = Some(Split {
        train_frac: fractions.train,
        valid_frac: fractions.valid,
        users,
        train_counts,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{preprocess, FilterMode, RawCheckIn, RawEvents};

    fn store_of(records: &[(&str, &str, i64)]) -> InteractionStore {
        let events = RawEvents::from_checkins(
            records
                .iter()
                .map(|&(u, p, t)| RawCheckIn {
                    user: u.into(),
                    poi: p.into(),
                    lat: 0.0,
                    lon: 0.0,
                    when: t,
                })
                .collect(),
        );
        preprocess(&events, 1, 1, FilterMode::SinglePass).unwrap()
    }

    #[test]
    fn sizes_survive_float_rounding() {
        let f = SplitFractions::default();
        assert_eq!(f.sizes(10), (7, 1, 2));
        assert_eq!(f.sizes(100), (70, 10, 20));
        assert_eq!(f.sizes(3), (3, 0, 0));
        assert_eq!(f.sizes(5), (4, 0, 1));
        assert_eq!(f.sizes(0), (0, 0, 0));
    }

    #[test]
    fn ten_distinct_checkins() {
        let recs: Vec<(String, i64)> = (1..=10).map(|t| (format!("p{t}"), t)).collect();
        let refs: Vec<(&str, &str, i64)> = recs.iter().map(|(p, t)| ("u", p.as_str(), *t)).collect();
        let store = temporal_split(&store_of(&refs), SplitFractions::default()).unwrap();
        let name = |ps: &[u32]| -> Vec<String> {
            ps.iter().map(|&p| store.pois().name(p).to_string()).collect()
        };
        let mut train = name(&store.train_items(0));
        train.sort_by_key(|s| s[1..].parse::<u32>().unwrap());
        assert_eq!(train, ["p1", "p2", "p3", "p4", "p5", "p6", "p7"]);
        assert_eq!(name(store.validation_items(0)), ["p8"]);
        let mut test = name(store.test_items(0));
        test.sort_by_key(|s| s[1..].parse::<u32>().unwrap());
        assert_eq!(test, ["p9", "p10"]);
        let s = &store.split().unwrap().users[0];
        assert_eq!(s.train_end, Some(7));
        assert_eq!(s.validation_start, Some(8));
        assert_eq!(s.test_start, Some(9));
    }

    #[test]
    fn single_poi_user_train_only() {
        let store = temporal_split(&store_of(&[("u", "a", 1), ("u", "a", 2)]), SplitFractions::default()).unwrap();
        assert_eq!(store.train_items(0), vec![0]);
        assert!(store.validation_items(0).is_empty());
        assert!(store.test_items(0).is_empty());
        assert!(store.split().unwrap().users[0].flagged);
    }

    #[test]
    fn repeated_poi_stays_in_earliest_partition() {
        // a at t1 (train) reappears at t10 (test period)
        let mut recs = vec![("u", "a", 1)];
        let names = ["b", "c", "d", "e", "f", "g", "h", "i"];
        for (i, n) in names.iter().enumerate() {
            recs.push(("u", n, i as i64 + 2));
        }
        recs.push(("u", "a", 10));
        let store = temporal_split(&store_of(&recs), SplitFractions::default()).unwrap();
        let a = store.pois().get("a").unwrap();
        assert!(store.train_items(0).contains(&a));
        assert!(!store.test_items(0).contains(&a));
        assert_eq!(store.test_items(0).len(), 1);
    }

    #[test]
    fn timestamp_ties_broken_by_poi_id() {
        let recs = [("u", "b", 5), ("u", "a", 5), ("u", "c", 5), ("u", "d", 5)];
        let a = temporal_split(&store_of(&recs), SplitFractions::default()).unwrap();
        let mut rev = recs;
        rev.reverse();
        let b = temporal_split(&store_of(&rev), SplitFractions::default()).unwrap();
        assert_eq!(a, b);
        // 4 check-ins: ceil(2.8) = 3 train, floor(0.8) = 0 test
        assert_eq!(a.train_items(0), vec![0, 1, 2]);
        assert_eq!(a.validation_items(0), &[3]);
    }

    #[test]
    fn rejects_bad_fractions() {
        let store = store_of(&[("u", "a", 1)]);
        assert!(temporal_split(&store, SplitFractions { train: 0.9, valid: 0.1 }).is_err());
        assert!(temporal_split(&store, SplitFractions { train: 0.0, valid: 0.1 }).is_err());
    }
}
