use std::collections::{BTreeSet, HashMap, HashSet};

use log::info;
use serde::{Deserialize, Serialize};

use super::{CheckIn, IdMap, InteractionStore, PoiMeta, RawEvents};
use crate::error::{Error, Result};

/// How the cold-POI and cold-user filters are applied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// One POI pass, then one user pass.
    #[default]
    SinglePass,
    /// Alternate the two passes until neither removes anything.
    FixedPoint,
}

/// Removes POIs with fewer than `min_poi_visits` check-ins, then users with fewer than
/// `min_user_checkins` remaining check-ins, and densifies identifiers.
///
/// Exact duplicate events (same user, POI and timestamp) are collapsed first.
pub fn preprocess(
    events: &RawEvents,
    min_user_checkins: usize,
    min_poi_visits: usize,
    mode: FilterMode,
) -> Result<InteractionStore> {
    if min_user_checkins < 1 || min_poi_visits < 1 {
        return Err(Error::InvalidInput(
            "filter thresholds must be at least 1".into(),
        ));
    }

    let mut seen = HashSet::new();
    let mut keep: Vec<&_> = events
        .checkins
        .iter()
        .filter(|c| seen.insert((c.user.as_str(), c.poi.as_str(), c.when)))
        .collect();
    let duplicates = events.checkins.len() - keep.len();

    loop {
        let before = keep.len();

        let mut poi_counts: HashMap<&str, usize> = HashMap::new();
        for c in &keep {
            *poi_counts.entry(c.poi.as_str()).or_default() += 1;
        }
        keep.retain(|c| poi_counts[c.poi.as_str()] >= min_poi_visits);

        let mut user_counts: HashMap<&str, usize> = HashMap::new();
        for c in &keep {
            *user_counts.entry(c.user.as_str()).or_default() += 1;
        }
        keep.retain(|c| user_counts[c.user.as_str()] >= min_user_checkins);

        if mode == FilterMode::SinglePass || keep.len() == before {
            break;
        }
    }

    if keep.is_empty() {
        return Err(Error::EmptyAfterFiltering(format!(
            "{} check-ins in, thresholds users >= {min_user_checkins}, POIs >= {min_poi_visits}",
            events.checkins.len()
        )));
    }

    let users = IdMap::sorted(keep.iter().map(|c| c.user.as_str()));
    let pois = IdMap::sorted(keep.iter().map(|c| c.poi.as_str()));

    let mut coords: Vec<Option<(f64, f64)>> = vec![None; pois.len()];
    let checkins: Vec<CheckIn> = keep
        .iter()
        .map(|c| {
            let poi = pois.get(&c.poi).expect("kept poi indexed");
            coords[poi as usize].get_or_insert((c.lat, c.lon));
            CheckIn {
                user: users.get(&c.user).expect("kept user indexed"),
                poi,
                when: c.when,
            }
        })
        .collect();

    let (categories, poi_categories) = match &events.categories {
        Some(pairs) => {
            let mut per_poi: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); pois.len()];
            for (poi, cat) in pairs {
                if let Some(p) = pois.get(poi) {
                    per_poi[p as usize].insert(cat.as_str());
                }
            }
            let cats = IdMap::sorted(per_poi.iter().flatten().copied());
            let idx: Vec<Vec<u32>> = per_poi
                .iter()
                .map(|set| {
                    let mut v: Vec<u32> = set.iter().map(|c| cats.get(c).unwrap()).collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            (Some(cats), idx)
        }
        None => (None, vec![Vec::new(); pois.len()]),
    };

    let poi_meta = coords
        .into_iter()
        .zip(poi_categories)
        .map(|(c, categories)| {
            let (lat, lon) = c.expect("every kept POI has a check-in");
            PoiMeta {
                lat,
                lon,
                categories,
            }
        })
        .collect();

    let edges = events
        .social
        .iter()
        .filter_map(|(a, b)| Some((users.get(a)?, users.get(b)?)))
        .collect();

    let store = InteractionStore::assemble(users, pois, categories, checkins, edges, poi_meta);
    info!(
        "preprocess: {} -> {} check-ins ({} duplicates), {} users, {} POIs",
        events.checkins.len(),
        store.n_checkins(),
        duplicates,
        store.n_users(),
        store.n_pois()
    );
    Ok(store)
}
