//! Seeded synthetic check-in data: a two-block fixture with planted structure, and a small
//! LBSN-like corpus (clustered geography, long-tail popularity, friendships, categories).

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{preprocess, temporal_split, FilterMode, InteractionStore, RawCheckIn, RawEvents, SplitFractions};
use crate::error::{Error, Result};

/// Two user clusters, each visiting only its own block of POIs.
///
/// Block B users check in several times per visit, so B items dominate global popularity while
/// A users are the majority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBlock {
    pub users_a: usize,
    pub users_b: usize,
    pub items_per_block: usize,
    pub visits_per_user: usize,
    pub repeats_b: usize,
    pub seed: u64,
}

impl Default for TwoBlock {
    fn default() -> Self {
        TwoBlock {
            users_a: 60,
            users_b: 40,
            items_per_block: 20,
            visits_per_user: 12,
            repeats_b: 3,
            seed: 7,
        }
    }
}

impl TwoBlock {
    pub fn events(&self) -> RawEvents {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut checkins = Vec::new();
        for u in 0..self.users_a + self.users_b {
            let in_b = u >= self.users_a;
            let (prefix, repeats) = if in_b { ("b", self.repeats_b) } else { ("a", 1) };
            let mut items: Vec<usize> = (0..self.items_per_block).collect();
            items.shuffle(&mut rng);
            let mut t = 1_000 + (u as i64) * 100_000;
            for &i in items.iter().take(self.visits_per_user) {
                for _ in 0..repeats {
                    checkins.push(RawCheckIn {
                        user: format!("u{u:03}"),
                        poi: format!("{prefix}{i:02}"),
                        lat: if in_b { 10.0 } else { -10.0 },
                        lon: i as f64 * 0.01,
                        when: t,
                    });
                    t += 60;
                }
            }
        }
        RawEvents::from_checkins(checkins)
    }

    /// Whether a POI name belongs to block B.
    pub fn is_block_b(poi: &str) -> bool {
        poi.starts_with('b')
    }

    pub fn user_in_block_b(&self, user: &str) -> bool {
        user[1..].parse::<usize>().map(|u| u >= self.users_a).unwrap_or(false)
    }
}

/// The two-block fixture, preprocessed and temporally split.
pub fn two_block_store(spec: &TwoBlock) -> InteractionStore {
    let store = preprocess(&spec.events(), 1, 1, FilterMode::SinglePass).expect("non-empty fixture");
    temporal_split(&store, SplitFractions::default()).expect("valid fractions")
}

/// Parameters of the LBSN-like corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub users: usize,
    pub pois: usize,
    pub cities: usize,
    pub categories: usize,
    pub min_checkins: usize,
    pub max_checkins: usize,
    pub friends_per_user: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            users: 200,
            pois: 500,
            cities: 4,
            categories: 24,
            min_checkins: 15,
            max_checkins: 240,
            friends_per_user: 4,
            seed: 20_220_412,
        }
    }
}

const CITY_CENTERS: [(f64, f64); 6] = [
    (40.7580, -73.9855),
    (37.7749, -122.4194),
    (41.8781, -87.6298),
    (30.2672, -97.7431),
    (47.6062, -122.3321),
    (25.7617, -80.1918),
];

/// Generates check-ins, friendships and category assignments.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<RawEvents> {
    if spec.cities == 0 || spec.cities > CITY_CENTERS.len() || spec.users == 0 || spec.pois == 0 {
        return Err(Error::InvalidInput(format!("unsupported corpus spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // POIs: city, jittered location (~5 km), Zipf-like base popularity, 1-2 categories.
    let mut poi_city = Vec::with_capacity(spec.pois);
    let mut poi_loc = Vec::with_capacity(spec.pois);
    let mut poi_cats: Vec<Vec<usize>> = Vec::with_capacity(spec.pois);
    let mut popularity = Vec::with_capacity(spec.pois);
    let mut ranks: Vec<usize> = (0..spec.pois).collect();
    ranks.shuffle(&mut rng);
    for p in 0..spec.pois {
        let city = p % spec.cities;
        let (lat, lon) = CITY_CENTERS[city];
        poi_city.push(city);
        poi_loc.push((lat + rng.gen_range(-0.05..0.05), lon + rng.gen_range(-0.06..0.06)));
        let mut cats = vec![rng.gen_range(0..spec.categories)];
        if rng.gen_bool(0.3) {
            let extra = rng.gen_range(0..spec.categories);
            if extra != cats[0] {
                cats.push(extra);
            }
        }
        poi_cats.push(cats);
        popularity.push(1.0 / (ranks[p] as f64 + 3.0).powf(1.1));
    }

    // Users: home city, heavy-tailed activity, a few favourite categories.
    let mut checkins = Vec::new();
    let mut user_city = Vec::with_capacity(spec.users);
    let span = (spec.max_checkins as f64 / spec.min_checkins as f64).ln();
    for u in 0..spec.users {
        let city = rng.gen_range(0..spec.cities);
        user_city.push(city);
        let n = (spec.min_checkins as f64 * (span * rng.gen::<f64>().powf(1.6)).exp()).round() as usize;
        let favourite: Vec<usize> = (0..3).map(|_| rng.gen_range(0..spec.categories)).collect();
        let (home_lat, home_lon) = {
            let (lat, lon) = CITY_CENTERS[city];
            (lat + rng.gen_range(-0.03..0.03), lon + rng.gen_range(-0.04..0.04))
        };

        let weights: Vec<f64> = (0..spec.pois)
            .map(|p| {
                let mut w = popularity[p];
                if poi_city[p] != city {
                    w *= 0.02;
                }
                if poi_cats[p].iter().any(|c| favourite.contains(c)) {
                    w *= 4.0;
                }
                let (lat, lon) = poi_loc[p];
                let d2 = (lat - home_lat).powi(2) + (lon - home_lon).powi(2);
                w * (-d2 / 0.002).exp().max(0.05)
            })
            .collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");

        let mut t: i64 = 1_262_304_000 + rng.gen_range(0..30 * 86_400);
        let mut last: Option<usize> = None;
        for _ in 0..n {
            let p = match last {
                // revisit or move to a spatial neighbour of the previous POI
                Some(prev) if rng.gen_bool(0.35) => {
                    let near = (0..8)
                        .map(|_| dist.sample(&mut rng))
                        .min_by(|&a, &b| {
                            let da = sq_dist(poi_loc[a], poi_loc[prev]);
                            let db = sq_dist(poi_loc[b], poi_loc[prev]);
                            da.total_cmp(&db)
                        })
                        .unwrap();
                    if rng.gen_bool(0.3) { prev } else { near }
                }
                _ => dist.sample(&mut rng),
            };
            checkins.push(RawCheckIn {
                user: format!("{}", 1000 + u),
                poi: format!("{}", 50_000 + p),
                lat: poi_loc[p].0,
                lon: poi_loc[p].1,
                when: t,
            });
            t += rng.gen_range(1_800..3 * 86_400);
            last = Some(p);
        }
    }

    // Friendships, mostly within the home city.
    let mut social = Vec::new();
    for u in 0..spec.users {
        for _ in 0..spec.friends_per_user / 2 {
            let v = loop {
                let v = rng.gen_range(0..spec.users);
                if v != u && (user_city[v] == user_city[u] || rng.gen_bool(0.1)) {
                    break v;
                }
            };
            let (a, b) = (u.min(v), u.max(v));
            social.push((format!("{}", 1000 + a), format!("{}", 1000 + b)));
        }
    }
    social.sort();
    social.dedup();

    let categories = poi_cats
        .iter()
        .enumerate()
        .flat_map(|(p, cats)| {
            cats.iter()
                .map(move |&c| (format!("{}", 50_000 + p), format!("category-{c:02}")))
        })
        .collect();

    Ok(RawEvents {
        checkins,
        social,
        categories: Some(categories),
        report: Default::default(),
    })
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Writes `checkins.tsv`, `social.tsv` and `categories.tsv` into `dir`.
pub fn write_corpus(events: &RawEvents, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, lines: Vec<String>| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for l in lines {
            writeln!(f, "{l}").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    };
    write(
        "checkins.tsv",
        events
            .checkins
            .iter()
            .map(|c| format!("{}\t{}\t{:.6}\t{:.6}\t{}", c.user, c.poi, c.lat, c.lon, c.when))
            .collect(),
    )?;
    write(
        "social.tsv",
        events.social.iter().map(|(a, b)| format!("{a}\t{b}")).collect(),
    )?;
    if let Some(cats) = &events.categories {
        write(
            "categories.tsv",
            cats.iter().map(|(p, c)| format!("{p}\t{c}")).collect(),
        )?;
    }
    Ok(())
}
