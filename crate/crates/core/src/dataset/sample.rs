use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CheckIn, IdMap, InteractionStore, UserIdx};
use crate::error::{Error, Result};

/// Keeps `floor(fraction * n_users)` users chosen uniformly at random. POI indices are unchanged.
pub fn sample_users(store: &InteractionStore, fraction: f64, seed: u64) -> Result<InteractionStore> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "sampling fraction must be in (0, 1], got {fraction}"
        )));
    }
    if fraction == 1.0 {
        return Ok(store.clone());
    }
    let n = store.n_users();
    let keep_n = (fraction * n as f64 + 1e-9).floor() as usize;
    if keep_n == 0 {
        return Err(Error::InvalidInput(format!(
            "sampling fraction {fraction} keeps no users out of {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept: Vec<usize> = index::sample(&mut rng, n, keep_n).into_vec();
    kept.sort_unstable();

    let mut remap = vec![None; n];
    for (new, &old) in kept.iter().enumerate() {
        remap[old] = Some(new as UserIdx);
    }

    let users = IdMap::from(
        kept.iter()
            .map(|&u| store.users.name(u as UserIdx).to_string())
            .collect::<Vec<_>>(),
    );
    let checkins: Vec<CheckIn> = store
        .checkins
        .iter()
        .filter_map(|c| {
            remap[c.user as usize].map(|user| CheckIn { user, ..*c })
        })
        .collect();
    let mut edges = Vec::new();
    for &old in &kept {
        for &f in store.friends(old as UserIdx) {
            if let (Some(a), Some(b)) = (remap[old], remap[f as usize]) {
                if a < b {
                    edges.push((a, b));
                }
            }
        }
    }

    let mut out = InteractionStore::assemble(
        users,
        store.pois.clone(),
        store.categories.clone(),
        checkins,
        edges,
        store.poi_meta.clone(),
    );
    if let Some(split) = &store.split {
        let mut split = split.clone();
        split.users = kept.iter().map(|&u| split.users[u].clone()).collect();
        split.train_counts = kept.iter().map(|&u| split.train_counts[u].clone()).collect();
        out.split = Some(split);
    }
    Ok(out)
}
