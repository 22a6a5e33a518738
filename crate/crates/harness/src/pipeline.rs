//! Staged, digest-cached execution: prep, analyze, train, recommend, evaluate.
//!
//! Every stage output is stored under `cache/` in a file named after the digest of the stage's
//! inputs. Inputs include the digests of upstream outputs, so deleting any cached file and
//! rerunning reproduces exactly that file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use poifair_core::contextual::{ContextualKind, ContextualModel, ContextualParams};
use poifair_core::dataset::{
    ingest, preprocess, sample_users, temporal_split, DatasetStats, IngestReport, InteractionStore, UserIdx,
};
use poifair_core::error::Error as CoreError;
use poifair_core::metrics::{build_report, evaluate_model, mean_defined, ndcg_at_k, FairnessReport};
use poifair_core::profiling::{longtail_curve, profile_popularity, GroupScheme, ProfileStats};
use poifair_core::recommenders::{
    excluded_items, import_external_rankings, recommend, train_bpr, train_mostpop, train_pf, train_wmf, BprParams,
    Exclusion, FactorModel, PfParams, RankedSlate, Scorer, WmfParams,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{describe_point, grid_points, override_params, LoadedConfig, BUILTIN_MODELS};
use crate::error::{HarnessError, Result};
use crate::io::{file_digest, sha256_hex, write_atomic};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Preprocessed, optionally sampled and split data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prepared {
    pub store: InteractionStore,
    pub ingest: IngestReport,
    /// Check-in lines parsed before any filtering.
    pub raw_checkins: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    pub stats: DatasetStats,
    pub scheme: GroupScheme,
    pub user_group_sizes: [usize; 4],
    pub item_group_sizes: [usize; 3],
    pub profiles: ProfileStats,
    /// (rank, check-ins) of every POI in descending popularity.
    pub longtail: Vec<(usize, u64)>,
}

/// Validation score of one hyperparameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub setting: String,
    pub params: serde_json::Value,
    /// Mean NDCG@k on the validation partition; `None` when no user has validation items.
    pub validation_ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: String,
    pub candidates: Vec<Candidate>,
    pub selected: usize,
    /// Factor matrices for the latent-factor models; other models are rebuilt from the data.
    pub factors: Option<FactorModel>,
}

impl Trained {
    pub fn selected_params(&self) -> &serde_json::Value {
        &self.candidates[self.selected].params
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recommendations {
    pub model: String,
    pub slates: Vec<RankedSlate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Digest of everything the stage depends on.
    pub input_digest: String,
    pub output: PathBuf,
    pub output_digest: String,
    pub cached: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: PathBuf,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config_digest: String,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Selected setting of one model, as carried into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub setting: String,
    pub params: serde_json::Value,
    pub validation_ndcg: Option<f64>,
}

/// Everything in `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub toolkit_version: String,
    pub config_digest: String,
    pub stats: DatasetStats,
    pub selections: BTreeMap<String, Selection>,
    pub report: FairnessReport,
}

struct Stage<T> {
    value: T,
    digest: String,
}

pub struct Pipeline {
    cfg: LoadedConfig,
    out_dir: PathBuf,
    cache_dir: PathBuf,
    config_digest: String,
    records: Vec<StageRecord>,
    prep: Option<Stage<Prepared>>,
    analysis: Option<Stage<Analysis>>,
    trained: BTreeMap<String, Stage<Trained>>,
    recommended: BTreeMap<String, Stage<Recommendations>>,
    evaluation: Option<Stage<FairnessReport>>,
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("stage values serialize")
}

impl Pipeline {
    /// Checks that the output directory is writable before any computation starts.
    pub fn new(cfg: LoadedConfig) -> Result<Self> {
        let out_dir = cfg.resolve(&cfg.config.output_dir);
        let cache_dir = out_dir.join("cache");
        let probe = cache_dir.join(".write-probe");
        fs::create_dir_all(&cache_dir)
            .and_then(|_| fs::write(&probe, b""))
            .and_then(|_| fs::remove_file(&probe))
            .map_err(|source| HarnessError::OutputDir {
                path: out_dir.clone(),
                source,
            })?;
        // where the outputs go does not change what they contain
        let mut hashed = cfg.config.clone();
        hashed.output_dir = PathBuf::new();
        let config_digest = sha256_hex(&json(&hashed));
        Ok(Pipeline {
            cfg,
            out_dir,
            cache_dir,
            config_digest,
            records: Vec::new(),
            prep: None,
            analysis: None,
            trained: BTreeMap::new(),
            recommended: BTreeMap::new(),
            evaluation: None,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn config(&self) -> &LoadedConfig {
        &self.cfg
    }

    pub fn records(&self) -> &[StageRecord] {
        &self.records
    }

    /// Loads the stage output cached under the digest of `inputs`, or computes and stores it.
    fn cached<T, K>(&mut self, stage: &str, inputs: &K, compute: impl FnOnce(&Self) -> Result<T>) -> Result<Stage<T>>
    where
        T: Serialize + DeserializeOwned,
        K: Serialize,
    {
        let started = Instant::now();
        let input_digest = sha256_hex(&json(&(stage, TOOLKIT_VERSION, inputs)));
        let file = format!("{}-{}.json", stage.replace(':', "-"), &input_digest[..16]);
        let path = self.cache_dir.join(&file);
        let mut hit = None;
        if let Ok(bytes) = fs::read(&path) {
            match serde_json::from_slice::<T>(&bytes) {
                Ok(v) => hit = Some((v, sha256_hex(&bytes))),
                Err(e) => warn!("{stage}: discarding unreadable cache file {}: {e}", path.display()),
            }
        }
        let cached = hit.is_some();
        let (value, output_digest) = match hit {
            Some(h) => h,
            None => {
                let value = compute(self)?;
                let bytes = json(&value);
                write_atomic(&path, &bytes).map_err(|source| HarnessError::Write {
                    stage: stage.to_string(),
                    path: path.clone(),
                    source,
                })?;
                (value, sha256_hex(&bytes))
            }
        };
        let seconds = started.elapsed().as_secs_f64();
        info!("{stage}: {} in {seconds:.2}s", if cached { "cache hit" } else { "computed" });
        self.records.push(StageRecord {
            stage: stage.to_string(),
            input_digest,
            output: PathBuf::from("cache").join(file),
            output_digest: output_digest.clone(),
            cached,
            seconds,
        });
        Ok(Stage {
            value,
            digest: output_digest,
        })
    }

    fn input_file(&self, stage: &str, path: &Path) -> Result<(PathBuf, String)> {
        let full = self.cfg.resolve(path);
        let digest = file_digest(&full).map_err(|source| {
            HarnessError::stage(stage, CoreError::Io { path: full.clone(), source })
        })?;
        Ok((full, digest))
    }

    pub fn prep(&mut self) -> Result<&Prepared> {
        if self.prep.is_none() {
            let c = &self.cfg.config;
            let (checkins, d_checkins) = self.input_file("prep", &c.dataset.checkins)?;
            let social = c.dataset.social.as_deref().map(|p| self.input_file("prep", p)).transpose()?;
            let categories = c.dataset.categories.as_deref().map(|p| self.input_file("prep", p)).transpose()?;
            let inputs = (
                (&d_checkins, social.as_ref().map(|s| &s.1), categories.as_ref().map(|s| &s.1)),
                (c.dataset.min_user_checkins, c.dataset.min_poi_visits, c.dataset.filter_mode),
                c.split,
                c.sampling,
            );
            let stage = self.cached("prep", &inputs, |p| {
                let c = &p.cfg.config;
                let wrap = |e| HarnessError::stage("prep", e);
                let events = ingest(
                    &checkins,
                    social.as_ref().map(|s| s.0.as_path()),
                    categories.as_ref().map(|s| s.0.as_path()),
                )
                .map_err(wrap)?;
                let store = preprocess(&events, c.dataset.min_user_checkins, c.dataset.min_poi_visits, c.dataset.filter_mode)
                    .map_err(wrap)?;
                let store = sample_users(&store, c.sampling.fraction, c.sampling.seed).map_err(wrap)?;
                let store = temporal_split(&store, c.split.fractions()).map_err(wrap)?;
                info!(
                    "prep: {} users, {} POIs, {} check-ins",
                    store.n_users(),
                    store.n_pois(),
                    store.n_checkins()
                );
                Ok(Prepared {
                    raw_checkins: events.checkins.len(),
                    ingest: events.report,
                    store,
                })
            })?;
            self.prep = Some(stage);
        }
        Ok(&self.prep.as_ref().expect("just set").value)
    }

    fn prep_digest(&mut self) -> Result<String> {
        self.prep()?;
        Ok(self.prep.as_ref().expect("prepared").digest.clone())
    }

    pub fn analyze(&mut self) -> Result<&Analysis> {
        if self.analysis.is_none() {
            let inputs = (self.prep_digest()?, self.cfg.config.groups);
            let stage = self.cached("analyze", &inputs, |p| {
                let store = &p.prep.as_ref().expect("prepared").value.store;
                let g = p.cfg.config.groups;
                let scheme = GroupScheme::build(store, g.user_thresholds, g.item_shares)
                    .map_err(|e| HarnessError::stage("analyze", e))?;
                Ok(Analysis {
                    stats: store.stats(),
                    user_group_sizes: scheme.user_group_sizes(),
                    item_group_sizes: scheme.item_group_sizes(),
                    profiles: profile_popularity(store, &scheme),
                    longtail: longtail_curve(store),
                    scheme,
                })
            })?;
            self.analysis = Some(stage);
        }
        Ok(&self.analysis.as_ref().expect("just set").value)
    }

    fn check_model(&self, model: &str) -> Result<()> {
        if BUILTIN_MODELS.contains(&model) || self.cfg.config.external_model(model).is_some() {
            return Ok(());
        }
        let known: Vec<String> = BUILTIN_MODELS
            .iter()
            .map(|s| s.to_string())
            .chain(self.cfg.config.external.iter().map(|e| e.name.clone()))
            .collect();
        Err(HarnessError::Config(vec![format!(
            "unknown model `{model}` (known: {})",
            known.join(", ")
        )]))
    }

    /// Trains a built-in model, choosing among grid settings by validation NDCG@k.
    pub fn train(&mut self, model: &str) -> Result<&Trained> {
        self.check_model(model)?;
        if self.cfg.config.external_model(model).is_some() {
            return Err(HarnessError::Config(vec![format!(
                "`{model}` is an external model; its rankings are imported at the recommend stage"
            )]));
        }
        if !self.trained.contains_key(model) {
            let c = &self.cfg.config;
            let base = match model {
                "bpr" => serde_json::to_value(&c.bpr),
                "wmf" => serde_json::to_value(&c.wmf),
                "pf" => serde_json::to_value(&c.pf),
                "geosoca" => serde_json::to_value(&c.geosoca),
                "lore" => serde_json::to_value(&c.lore),
                _ => Ok(serde_json::Value::Null),
            }
            .expect("params serialize");
            let inputs = (self.prep_digest()?, model, base, self.cfg.config.grid.get(model).cloned(), self.cfg.config.metrics.k);
            let stage_name = format!("train:{model}");
            let stage = self.cached(&stage_name, &inputs, |p| p.fit(model))?;
            self.trained.insert(model.to_string(), stage);
        }
        Ok(&self.trained[model].value)
    }

    fn fit(&self, model: &str) -> Result<Trained> {
        let c = &self.cfg.config;
        let store = &self.prep.as_ref().expect("prepared").value.store;
        let stage = format!("train:{model}");
        let wrap = |e| HarnessError::stage(stage.clone(), e);
        let k = c.metrics.k;
        let mut candidates = Vec::new();
        let mut fitted: Vec<Option<FactorModel>> = Vec::new();
        let points = grid_points(c.grid.get(model));
        for point in &points {
            let setting = describe_point(point);
            let bad = |e: String| HarnessError::Config(vec![format!("{model} at {setting}: {e}")]);
            let (params, fitted_model) = match model {
                "mostpop" => (serde_json::Value::Null, Fitted::Other(Box::new(train_mostpop(store)))),
                "bpr" => {
                    let p: BprParams = override_params(&c.bpr, point).map_err(bad)?;
                    (params_json(&p), Fitted::Factors(train_bpr(store, &p).map_err(wrap)?))
                }
                "wmf" => {
                    let p: WmfParams = override_params(&c.wmf, point).map_err(bad)?;
                    (params_json(&p), Fitted::Factors(train_wmf(store, &p).map_err(wrap)?.model))
                }
                "pf" => {
                    let p: PfParams = override_params(&c.pf, point).map_err(bad)?;
                    (params_json(&p), Fitted::Factors(train_pf(store, &p).map_err(wrap)?.model))
                }
                "geosoca" | "lore" => {
                    let (kind, base) = contextual_kind(model, c);
                    let p: ContextualParams = override_params(base, point).map_err(bad)?;
                    let m = ContextualModel::build(kind, store, &p).map_err(wrap)?;
                    (params_json(&p), Fitted::Other(Box::new(m)))
                }
                other => unreachable!("not a built-in model: {other}"),
            };
            let validation_ndcg = validation_ndcg(fitted_model.scorer(), store, k);
            info!("{model} [{setting}]: validation NDCG@{k} = {validation_ndcg:?}");
            candidates.push(Candidate {
                setting,
                params,
                validation_ndcg,
            });
            fitted.push(match fitted_model {
                Fitted::Factors(f) => Some(f),
                Fitted::Other(_) => None,
            });
        }
        let mut selected = 0;
        for (i, cand) in candidates.iter().enumerate() {
            let best = candidates[selected].validation_ndcg.unwrap_or(f64::NEG_INFINITY);
            if cand.validation_ndcg.unwrap_or(f64::NEG_INFINITY) > best {
                selected = i;
            }
        }
        if candidates.len() > 1 {
            info!("{model}: selected {}", candidates[selected].setting);
        }
        Ok(Trained {
            model: model.to_string(),
            factors: fitted.swap_remove(selected),
            candidates,
            selected,
        })
    }

    /// Test-time slates for one model: built-ins are scored, externals imported.
    pub fn recommend(&mut self, model: &str) -> Result<&Recommendations> {
        self.check_model(model)?;
        if !self.recommended.contains_key(model) {
            let k = self.cfg.config.metrics.k;
            let stage_name = format!("recommend:{model}");
            let stage = if let Some(ext) = self.cfg.config.external_model(model).cloned() {
                let (path, digest) = self.input_file(&stage_name, &ext.rankings)?;
                let inputs = (self.prep_digest()?, &ext.name, digest, k);
                self.cached(&stage_name, &inputs, |p| p.import(&ext.name, &path))?
            } else {
                self.train(model)?;
                let inputs = (self.trained[model].digest.clone(), k);
                self.cached(&stage_name, &inputs, |p| p.score(model))?
            };
            self.recommended.insert(model.to_string(), stage);
        }
        Ok(&self.recommended[model].value)
    }

    fn score(&self, model: &str) -> Result<Recommendations> {
        let c = &self.cfg.config;
        let store = &self.prep.as_ref().expect("prepared").value.store;
        let trained = &self.trained[model].value;
        let stage = format!("recommend:{model}");
        let wrap = |e| HarnessError::stage(stage.clone(), e);
        let k = c.metrics.k;
        let slates = match (model, &trained.factors) {
            (_, Some(f)) => {
                if !f.all_finite() {
                    return Err(wrap(CoreError::Diverged { model: f.kind.name(), step: 0 }));
                }
                recommend(f, store, k, Exclusion::TrainAndValidation)
            }
            ("mostpop", None) => recommend(&train_mostpop(store), store, k, Exclusion::TrainAndValidation),
            ("geosoca" | "lore", None) => {
                let (kind, _) = contextual_kind(model, c);
                let params: ContextualParams = serde_json::from_value(trained.selected_params().clone())
                    .map_err(|e| wrap(CoreError::Json(e)))?;
                let m = ContextualModel::build(kind, store, &params).map_err(wrap)?;
                recommend(&m, store, k, Exclusion::TrainAndValidation)
            }
            (other, None) => unreachable!("{other} has no factors"),
        };
        Ok(Recommendations {
            model: model.to_string(),
            slates,
        })
    }

    /// Imports outside rankings, dropping users absent from a sampled store and any POI the user
    /// already visited in train or validation, then cutting to `k`.
    fn import(&self, name: &str, path: &Path) -> Result<Recommendations> {
        let c = &self.cfg.config;
        let store = &self.prep.as_ref().expect("prepared").value.store;
        let stage = format!("recommend:{name}");
        let wrap = |e| HarnessError::stage(stage.clone(), e);
        let source = if c.sampling.fraction < 1.0 {
            let filtered = self.cache_dir.join(format!("external-{name}-sampled.csv"));
            let text = fs::read_to_string(path).map_err(|source| wrap(CoreError::Io { path: path.to_path_buf(), source }))?;
            let mut kept = String::new();
            let mut dropped = 0usize;
            for (i, line) in text.lines().enumerate() {
                let user = line.split(',').next().unwrap_or("").trim();
                if i == 0 || store.users().get(user).is_some() {
                    kept.push_str(line);
                    kept.push('\n');
                } else {
                    dropped += 1;
                }
            }
            if dropped > 0 {
                info!("{name}: {dropped} ranking rows of users outside the sample skipped");
            }
            write_atomic(&filtered, kept.as_bytes()).map_err(|source| HarnessError::Write {
                stage: stage.clone(),
                path: filtered.clone(),
                source,
            })?;
            filtered
        } else {
            path.to_path_buf()
        };
        let imported = import_external_rankings(&source, store).map_err(wrap)?;
        let mut removed = 0usize;
        let mut slates = imported.slates;
        for s in &mut slates {
            let excluded = excluded_items(store, s.user, Exclusion::TrainAndValidation);
            let before = s.entries.len();
            s.entries.retain(|&(p, _)| excluded.binary_search(&p).is_err());
            removed += before - s.entries.len();
            s.entries.truncate(c.metrics.k);
        }
        if removed > 0 {
            warn!("{name}: {removed} recommended POIs already visited in train or validation were dropped");
        }
        let missing = store.n_users() - imported.users_in_file;
        if missing > 0 {
            warn!("{name}: {missing} users have no rankings");
        }
        Ok(Recommendations {
            model: name.to_string(),
            slates,
        })
    }

    /// Metrics for every enabled model.
    pub fn evaluate(&mut self) -> Result<&FairnessReport> {
        if self.evaluation.is_none() {
            let models = self.cfg.config.enabled_models();
            if models.is_empty() {
                return Err(HarnessError::Config(vec!["no models enabled".into()]));
            }
            let mut upstream = Vec::new();
            for m in &models {
                self.recommend(m)?;
                upstream.push((m.clone(), self.recommended[m].digest.clone()));
            }
            self.analyze()?;
            let inputs = (
                self.prep_digest()?,
                self.analysis.as_ref().expect("analyzed").digest.clone(),
                upstream,
                self.cfg.config.metrics.clone(),
            );
            let stage = self.cached("evaluate", &inputs, |p| {
                let store = &p.prep.as_ref().expect("prepared").value.store;
                let scheme = &p.analysis.as_ref().expect("analyzed").value.scheme;
                let params = &p.cfg.config.metrics;
                let reports = models
                    .iter()
                    .map(|m| {
                        let r = &p.recommended[m].value;
                        evaluate_model(m, store, scheme, &r.slates, params).map_err(|e| HarnessError::stage("evaluate", e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(build_report(reports, params))
            })?;
            self.evaluation = Some(stage);
        }
        Ok(&self.evaluation.as_ref().expect("just set").value)
    }

    pub fn run_report(&mut self) -> Result<RunReport> {
        let report = self.evaluate()?.clone();
        let mut selections = BTreeMap::new();
        for (name, t) in &self.trained {
            let c = &t.value.candidates[t.value.selected];
            selections.insert(
                name.clone(),
                Selection {
                    setting: c.setting.clone(),
                    params: c.params.clone(),
                    validation_ndcg: c.validation_ndcg,
                },
            );
        }
        Ok(RunReport {
            dataset: self.cfg.config.dataset.name.clone(),
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config_digest: self.config_digest.clone(),
            stats: self.prep()?.store.stats(),
            selections,
            report,
        })
    }

    pub fn manifest(&self, artifacts: Vec<ArtifactRecord>) -> RunManifest {
        RunManifest {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config_digest: self.config_digest.clone(),
            stages: self.records.clone(),
            artifacts,
        }
    }
}

fn contextual_kind<'a>(model: &str, c: &'a crate::config::ExperimentConfig) -> (ContextualKind, &'a ContextualParams) {
    match model {
        "geosoca" => (ContextualKind::GeoSoCa, &c.geosoca),
        _ => (ContextualKind::Lore, &c.lore),
    }
}

fn params_json<T: Serialize>(p: &T) -> serde_json::Value {
    serde_json::to_value(p).expect("params serialize")
}

enum Fitted {
    Factors(FactorModel),
    Other(Box<dyn Scorer>),
}

impl Fitted {
    fn scorer(&self) -> &dyn Scorer {
        match self {
            Fitted::Factors(f) => f,
            Fitted::Other(m) => m.as_ref(),
        }
    }
}

/// Mean NDCG@k against the validation partition, with only train POIs excluded.
pub fn validation_ndcg(model: &dyn Scorer, store: &InteractionStore, k: usize) -> Option<f64> {
    let slates = recommend(model, store, k, Exclusion::TrainOnly);
    let per_user: Vec<Option<f64>> = (0..store.n_users() as UserIdx)
        .map(|u| {
            let relevant = store.validation_items(u);
            let items: Vec<_> = slates[u as usize].items().collect();
            (!relevant.is_empty()).then(|| ndcg_at_k(&items, relevant, k))
        })
        .collect();
    let (mean, n) = mean_defined(&per_user);
    (n > 0).then_some(mean)
}
