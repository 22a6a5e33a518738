//! Regenerates the bundled synthetic dataset and the rankings of its external model.

use std::path::PathBuf;

use log::info;
use poifair_core::dataset::{InteractionStore, PoiIdx, UserIdx};
use poifair_core::error::Error as CoreError;
use poifair_core::recommenders::{recommend, write_rankings, Exclusion, Scorer};
use poifair_core::synthetic::{generate_corpus, write_corpus, CorpusSpec};

use crate::config::LoadedConfig;
use crate::error::{HarnessError, Result};
use crate::pipeline::Pipeline;

/// Item-based neighbourhood scorer on training visits, standing in for an outside model.
pub struct ItemKnn {
    /// Cosine similarity between POIs over the sets of users who visited them.
    similarity: Vec<f32>,
    n_pois: usize,
    train: Vec<Vec<PoiIdx>>,
}

impl ItemKnn {
    pub fn build(store: &InteractionStore) -> Self {
        let n = store.n_pois();
        let train: Vec<Vec<PoiIdx>> = (0..store.n_users() as UserIdx).map(|u| store.train_items(u)).collect();
        let mut co = vec![0f32; n * n];
        let mut visitors = vec![0f32; n];
        for items in &train {
            for &i in items {
                visitors[i as usize] += 1.0;
                for &j in items {
                    co[i as usize * n + j as usize] += 1.0;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let denom = (visitors[i] * visitors[j]).sqrt();
                co[i * n + j] = if i == j || denom == 0.0 { 0.0 } else { co[i * n + j] / denom };
            }
        }
        ItemKnn {
            similarity: co,
            n_pois: n,
            train,
        }
    }
}

impl Scorer for ItemKnn {
    fn name(&self) -> &str {
        "itemknn"
    }

    fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        out.fill(0.0);
        for &j in &self.train[user as usize] {
            let row = &self.similarity[j as usize * self.n_pois..(j as usize + 1) * self.n_pois];
            for (s, &w) in out.iter_mut().zip(row) {
                *s += w as f64;
            }
        }
    }
}

/// Writes the corpus to the configured dataset paths, then one rankings file per external model.
pub fn synthesize(cfg: &LoadedConfig, spec: &CorpusSpec) -> Result<Vec<PathBuf>> {
    let d = &cfg.config.dataset;
    let dir = cfg.resolve(&d.checkins);
    let dir = dir.parent().map(PathBuf::from).unwrap_or_default();
    let wrap = |e| HarnessError::stage("synth", e);
    for (name, path) in [("checkins", Some(&d.checkins)), ("social", d.social.as_ref()), ("categories", d.categories.as_ref())] {
        if let Some(p) = path {
            let expected = dir.join(format!("{name}.tsv"));
            if cfg.resolve(p) != expected {
                return Err(HarnessError::Config(vec![format!(
                    "dataset.{name} must point to {} for synthesized data",
                    expected.display()
                )]));
            }
        }
    }

    let events = generate_corpus(spec).map_err(wrap)?;
    write_corpus(&events, &dir).map_err(wrap)?;
    let mut written = vec![dir.join("checkins.tsv"), dir.join("social.tsv"), dir.join("categories.tsv")];
    if !cfg.config.external.is_empty() {
        let mut pipeline = Pipeline::new(cfg.clone())?;
        let store = pipeline.prep()?.store.clone();
        let knn = ItemKnn::build(&store);
        let slates = recommend(&knn, &store, cfg.config.metrics.k, Exclusion::TrainAndValidation);
        for ext in &cfg.config.external {
            let path = cfg.resolve(&ext.rankings);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|source| wrap(CoreError::Io { path: parent.into(), source }))?;
            }
            write_rankings(&path, &store, &slates).map_err(wrap)?;
            info!("synth: wrote {} rankings to {}", ext.name, path.display());
            written.push(path);
        }
    }
    Ok(written)
}
