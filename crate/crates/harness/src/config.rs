//! Experiment configuration: a TOML file with documented defaults, a typo guard on keys, and
//! validation that reports every problem at once.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use poifair_core::contextual::ContextualParams;
use poifair_core::dataset::{FilterMode, SplitFractions};
use poifair_core::metrics::MetricParams;
use poifair_core::profiling::{DEFAULT_ITEM_SHARES, GOWALLA_USER_THRESHOLDS};
use poifair_core::recommenders::{BprParams, PfParams, WmfParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Models the toolkit trains itself, in report order.
pub const BUILTIN_MODELS: [&str; 6] = ["mostpop", "bpr", "wmf", "pf", "geosoca", "lore"];

/// Models with hyperparameters, and therefore a config section and an optional grid.
pub const TUNABLE_MODELS: [&str; 5] = ["bpr", "wmf", "pf", "geosoca", "lore"];

const SUGGESTION_SIMILARITY: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Label carried into the report.
    pub name: String,
    /// Check-in file: `user, poi, lat, lon, timestamp` per line.
    pub checkins: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub social: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<PathBuf>,
    pub min_user_checkins: usize,
    pub min_poi_visits: usize,
    pub filter_mode: FilterMode,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            name: "dataset".into(),
            checkins: PathBuf::new(),
            social: None,
            categories: None,
            min_user_checkins: 15,
            min_poi_visits: 10,
            filter_mode: FilterMode::SinglePass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub valid: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let f = SplitFractions::default();
        SplitConfig {
            train: f.train,
            valid: f.valid,
        }
    }
}

impl SplitConfig {
    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train,
            valid: self.valid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Share of users kept after preprocessing; 1 keeps everyone.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { fraction: 1.0, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupConfig {
    /// Check-in counts separating the four activity groups.
    pub user_thresholds: [u64; 3],
    /// Check-in mass of the short head, mid tail and long tail.
    pub item_shares: [f64; 3],
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            user_thresholds: GOWALLA_USER_THRESHOLDS,
            item_shares: DEFAULT_ITEM_SHARES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelsConfig {
    /// Models to run. Unset means every built-in model plus every external one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<Vec<String>>,
}

/// Rankings produced outside the toolkit, evaluated like any other model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExternalModel {
    pub name: String,
    /// `user_id,poi_id,rank,score` CSV.
    pub rankings: PathBuf,
}

/// Per-model lists of values to try, keyed by (dotted) hyperparameter name.
pub type Grid = BTreeMap<String, BTreeMap<String, Vec<toml::Value>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub split: SplitConfig,
    pub sampling: SamplingConfig,
    pub groups: GroupConfig,
    pub metrics: MetricParams,
    pub models: ModelsConfig,
    pub bpr: BprParams,
    pub wmf: WmfParams,
    pub pf: PfParams,
    pub geosoca: ContextualParams,
    pub lore: ContextualParams,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub grid: Grid,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub external: Vec<ExternalModel>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("output"),
            dataset: DatasetConfig::default(),
            split: SplitConfig::default(),
            sampling: SamplingConfig::default(),
            groups: GroupConfig::default(),
            metrics: MetricParams::default(),
            models: ModelsConfig::default(),
            bpr: BprParams::default(),
            wmf: WmfParams::default(),
            pf: PfParams::default(),
            geosoca: ContextualParams::default(),
            lore: ContextualParams::default(),
            grid: Grid::new(),
            external: Vec::new(),
        }
    }
}

/// A config together with the directory its relative paths are resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// Reads, checks and validates a config file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    let config = parse_config(&text)?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { config, base_dir })
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut value: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::Config(vec![e.to_string().trim_end().to_string()]))?;
    let mut problems = Vec::new();
    let mut unknown = Vec::new();
    unknown_keys(&value, &schema(), &[], &mut unknown);
    for (path, message) in unknown {
        remove_key(&mut value, &path);
        problems.push(message);
    }
    let config = match ExperimentConfig::deserialize(toml::Value::Table(value)) {
        Ok(c) => Some(c),
        Err(e) => {
            problems.push(e.to_string().trim_end().to_string());
            None
        }
    };
    if let Some(c) = &config {
        problems.extend(c.problems());
    }
    match config {
        Some(c) if problems.is_empty() => Ok(c),
        _ => Err(HarnessError::Config(problems)),
    }
}

pub fn to_toml(config: &ExperimentConfig) -> String {
    toml::to_string(config).expect("configs always serialize")
}

/// Every key a config may contain, as a TOML tree with all optional entries present.
fn schema() -> toml::Table {
    let mut exemplar = ExperimentConfig::default();
    exemplar.dataset.social = Some(PathBuf::from("-"));
    exemplar.dataset.categories = Some(PathBuf::from("-"));
    exemplar.models.enabled = Some(Vec::new());
    for c in [&mut exemplar.geosoca, &mut exemplar.lore] {
        c.geo.pilot_bandwidth_km = Some(1.0);
        c.max_transition_gap = Some(1);
    }
    exemplar.external.push(ExternalModel::default());
    let mut table = toml::Table::try_from(&exemplar).expect("exemplar serializes");
    table.insert("grid".into(), toml::Value::Table(toml::Table::new()));
    table
}

/// Flattened `a.b.c` names of the leaves of a table.
fn leaf_keys(table: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let name = format!("{prefix}{k}");
        match v {
            toml::Value::Table(t) => leaf_keys(t, &format!("{name}."), out),
            _ => out.push(name),
        }
    }
}

fn suggestion<'a>(key: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(key, c), c))
        .filter(|&(s, _)| s >= SUGGESTION_SIMILARITY)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

/// One step into a config tree: a table key or an array position.
#[derive(Debug, Clone)]
enum Step {
    Key(String),
    Index(usize),
}

fn display_path(path: &[Step]) -> String {
    let mut out = String::new();
    for s in path {
        match s {
            Step::Key(k) if out.is_empty() => out.push_str(k),
            Step::Key(k) => {
                out.push('.');
                out.push_str(k);
            }
            Step::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

/// Collects (path, message) for every key absent from the schema.
fn unknown_keys(user: &toml::Table, schema: &toml::Table, path: &[Step], out: &mut Vec<(Vec<Step>, String)>) {
    let known: Vec<&str> = schema.keys().map(String::as_str).collect();
    for (key, value) in user {
        let mut here = path.to_vec();
        here.push(Step::Key(key.clone()));
        let Some(expected) = schema.get(key) else {
            let mut message = format!("unknown key `{}`", display_path(&here));
            if let Some(s) = suggestion(key, known.iter().copied()) {
                let mut fixed = path.to_vec();
                fixed.push(Step::Key(s.to_string()));
                message.push_str(&format!("; did you mean `{}`?", display_path(&fixed)));
            }
            out.push((here, message));
            continue;
        };
        // grids are checked against the hyperparameters of their model during validation
        if path.is_empty() && key == "grid" {
            continue;
        }
        match (value, expected) {
            (toml::Value::Table(u), toml::Value::Table(s)) => unknown_keys(u, s, &here, out),
            (toml::Value::Array(items), toml::Value::Array(shape)) => {
                if let Some(toml::Value::Table(s)) = shape.first() {
                    for (i, item) in items.iter().enumerate() {
                        if let toml::Value::Table(u) = item {
                            let mut at = here.clone();
                            at.push(Step::Index(i));
                            unknown_keys(u, s, &at, out);
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

fn remove_key(table: &mut toml::Table, path: &[Step]) {
    match path {
        [Step::Key(k)] => {
            table.remove(k);
        }
        [Step::Key(k), rest @ ..] => {
            if let Some(v) = table.get_mut(k) {
                remove_in_value(v, rest);
            }
        }
        _ => {}
    }
}

fn remove_in_value(value: &mut toml::Value, path: &[Step]) {
    match (value, path) {
        (toml::Value::Table(t), _) => remove_key(t, path),
        (toml::Value::Array(items), [Step::Index(i), rest @ ..]) => {
            if let Some(v) = items.get_mut(*i) {
                remove_in_value(v, rest);
            }
        }
        _ => {}
    }
}

/// Overrides dotted keys of `base` with the given values.
pub fn override_params<T>(base: &T, overrides: &[(String, toml::Value)]) -> std::result::Result<T, String>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let mut tree = toml::Value::try_from(base).map_err(|e| e.to_string())?;
    for (key, value) in overrides {
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let toml::Value::Table(t) = node else {
                return Err(format!("`{key}` does not name a hyperparameter"));
            };
            if i + 1 == parts.len() {
                t.insert(part.to_string(), value.clone());
                break;
            }
            node = t.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
    }
    T::deserialize(tree).map_err(|e| e.message().to_string())
}

/// All combinations of a model's grid in a fixed order (keys sorted, values as listed).
pub fn grid_points(grid: Option<&BTreeMap<String, Vec<toml::Value>>>) -> Vec<Vec<(String, toml::Value)>> {
    let mut points = vec![Vec::new()];
    let Some(grid) = grid else { return points };
    for (key, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

fn bpr_problems(p: &BprParams) -> Vec<String> {
    let mut out = Vec::new();
    if p.dim == 0 {
        out.push("dim must be at least 1".to_string());
    }
    if !(p.learning_rate > 0.0) {
        out.push(format!("learning_rate must be positive, got {}", p.learning_rate));
    }
    if !(p.regularization > 0.0) {
        out.push(format!("regularization must be positive, got {}", p.regularization));
    }
    if p.steps_per_interaction == 0 {
        out.push("steps_per_interaction must be at least 1".to_string());
    }
    if !(p.init_scale >= 0.0) {
        out.push(format!("init_scale must be non-negative, got {}", p.init_scale));
    }
    out
}

fn wmf_problems(p: &WmfParams) -> Vec<String> {
    let mut out = Vec::new();
    if p.dim == 0 {
        out.push("dim must be at least 1".to_string());
    }
    if !(p.alpha >= 0.0) {
        out.push(format!("alpha must be non-negative, got {}", p.alpha));
    }
    if !(p.regularization > 0.0) {
        out.push(format!("regularization must be positive, got {}", p.regularization));
    }
    if p.sweeps == 0 {
        out.push("sweeps must be at least 1".to_string());
    }
    if !(p.init_scale >= 0.0) {
        out.push(format!("init_scale must be non-negative, got {}", p.init_scale));
    }
    out
}

fn pf_problems(p: &PfParams) -> Vec<String> {
    let mut out = Vec::new();
    if p.dim == 0 {
        out.push("dim must be at least 1".to_string());
    }
    for (name, v) in [
        ("user_shape", p.user_shape),
        ("user_rate", p.user_rate),
        ("item_shape", p.item_shape),
        ("item_rate", p.item_rate),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            out.push(format!("{name} must be positive, got {v}"));
        }
    }
    if p.max_iterations == 0 {
        out.push("max_iterations must be at least 1".to_string());
    }
    if !(p.tolerance >= 0.0) {
        out.push(format!("tolerance must be non-negative, got {}", p.tolerance));
    }
    out
}

fn contextual_problems(p: &ContextualParams) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(h) = p.geo.pilot_bandwidth_km {
        if !(h > 0.0) {
            out.push(format!("geo.pilot_bandwidth_km must be positive, got {h}"));
        }
    }
    if !(p.geo.min_bandwidth_km > 0.0) {
        out.push(format!("geo.min_bandwidth_km must be positive, got {}", p.geo.min_bandwidth_km));
    }
    if !(0.0..=1.0).contains(&p.geo.adaptivity) {
        out.push(format!("geo.adaptivity must lie in [0, 1], got {}", p.geo.adaptivity));
    }
    if !(p.geo.cutoff_bandwidths > 0.0) {
        out.push(format!("geo.cutoff_bandwidths must be positive, got {}", p.geo.cutoff_bandwidths));
    }
    let w = &p.weights;
    for (name, v) in [
        ("geo", w.geo),
        ("social", w.social),
        ("categorical", w.categorical),
        ("sequential", w.sequential),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            out.push(format!("weights.{name} must be finite and non-negative, got {v}"));
        }
    }
    if let Some(g) = p.max_transition_gap {
        if g <= 0 {
            out.push(format!("max_transition_gap must be positive, got {g}"));
        }
    }
    if !(p.recency_base > 0.0) || !p.recency_base.is_finite() {
        out.push(format!("recency_base must be positive, got {}", p.recency_base));
    }
    out
}

impl ExperimentConfig {
    /// Hyperparameter problems of one tunable model, checked on the typed params.
    fn model_problems(&self, model: &str, overrides: &[(String, toml::Value)]) -> Vec<String> {
        let typed = |r: std::result::Result<Vec<String>, String>| r.unwrap_or_else(|e| vec![e]);
        match model {
            "bpr" => typed(override_params(&self.bpr, overrides).map(|p| bpr_problems(&p))),
            "wmf" => typed(override_params(&self.wmf, overrides).map(|p| wmf_problems(&p))),
            "pf" => typed(override_params(&self.pf, overrides).map(|p| pf_problems(&p))),
            "geosoca" => typed(override_params(&self.geosoca, overrides).map(|p| contextual_problems(&p))),
            "lore" => typed(override_params(&self.lore, overrides).map(|p| contextual_problems(&p))),
            _ => Vec::new(),
        }
    }

    fn model_schema(&self, model: &str) -> Vec<String> {
        let exemplar = schema();
        let mut keys = Vec::new();
        if let Some(toml::Value::Table(t)) = exemplar.get(model) {
            leaf_keys(t, "", &mut keys);
        }
        keys
    }

    /// Every problem found, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = &self.dataset;
        if d.checkins.as_os_str().is_empty() {
            out.push("dataset.checkins is required".to_string());
        }
        if d.min_user_checkins == 0 || d.min_poi_visits == 0 {
            out.push("dataset.min_user_checkins and dataset.min_poi_visits must be at least 1".to_string());
        }
        if let Err(e) = self.split.fractions().validate() {
            out.push(format!("split: {e}"));
        }
        let s = self.sampling.fraction;
        if !(s > 0.0 && s <= 1.0) {
            out.push(format!("sampling.fraction must lie in (0, 1], got {s}"));
        }
        let t = self.groups.user_thresholds;
        if !(t[0] >= 1 && t[0] < t[1] && t[1] < t[2]) {
            out.push(format!("groups.user_thresholds must be positive and strictly increasing, got {t:?}"));
        }
        let shares = self.groups.item_shares;
        if shares.iter().any(|&x| !(x > 0.0)) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            out.push(format!("groups.item_shares must be positive and sum to 1, got {shares:?}"));
        }
        out.extend(self.metrics.problems());

        let mut externals = HashSet::new();
        for (i, e) in self.external.iter().enumerate() {
            if e.name.is_empty() {
                out.push(format!("external[{i}].name is required"));
            } else if BUILTIN_MODELS.contains(&e.name.as_str()) {
                out.push(format!("external[{i}].name `{}` clashes with a built-in model", e.name));
            } else if !externals.insert(e.name.as_str()) {
                out.push(format!("external[{i}].name `{}` is declared twice", e.name));
            }
            if e.rankings.as_os_str().is_empty() {
                out.push(format!("external[{i}].rankings is required"));
            }
        }
        if let Some(enabled) = &self.models.enabled {
            let known: Vec<&str> = BUILTIN_MODELS.iter().copied().chain(externals.iter().copied()).collect();
            let mut seen = HashSet::new();
            for name in enabled {
                if !known.contains(&name.as_str()) {
                    out.push(match suggestion(name, known.iter().copied()) {
                        Some(s) => format!("models.enabled: unknown model `{name}`; did you mean `{s}`?"),
                        None => format!("models.enabled: unknown model `{name}` (known: {})", known.join(", ")),
                    });
                } else if !seen.insert(name.as_str()) {
                    out.push(format!("models.enabled lists `{name}` twice"));
                }
            }
        }

        for model in TUNABLE_MODELS {
            out.extend(self.model_problems(model, &[]).into_iter().map(|p| format!("{model}.{p}")));
        }
        for (model, grid) in &self.grid {
            if !TUNABLE_MODELS.contains(&model.as_str()) {
                out.push(match suggestion(model, TUNABLE_MODELS) {
                    Some(s) => format!("grid.{model}: not a tunable model; did you mean `grid.{s}`?"),
                    None => format!("grid.{model}: not a tunable model"),
                });
                continue;
            }
            let keys = self.model_schema(model);
            let mut grid_ok = true;
            for (key, values) in grid {
                if !keys.contains(key) {
                    grid_ok = false;
                    out.push(match suggestion(key, keys.iter().map(String::as_str)) {
                        Some(s) => format!("grid.{model}: unknown key `{key}`; did you mean `{s}`?"),
                        None => format!("grid.{model}: unknown key `{key}`"),
                    });
                } else if values.is_empty() {
                    grid_ok = false;
                    out.push(format!("grid.{model}.{key} must list at least one value"));
                }
            }
            if grid_ok {
                for point in grid_points(Some(grid)) {
                    for p in self.model_problems(model, &point) {
                        out.push(format!("grid.{model} at {}: {p}", describe_point(&point)));
                    }
                }
            }
        }
        out.dedup();
        out
    }

    /// Enabled models in run order: built-ins first, then externals.
    pub fn enabled_models(&self) -> Vec<String> {
        let externals = self.external.iter().map(|e| e.name.clone());
        match &self.models.enabled {
            None => BUILTIN_MODELS.iter().map(|s| s.to_string()).chain(externals).collect(),
            Some(list) => BUILTIN_MODELS
                .iter()
                .map(|s| s.to_string())
                .chain(externals)
                .filter(|m| list.contains(m))
                .collect(),
        }
    }

    pub fn external_model(&self, name: &str) -> Option<&ExternalModel> {
        self.external.iter().find(|e| e.name == name)
    }

    /// Sets every seed: sampling and each stochastic model.
    pub fn override_seed(&mut self, seed: u64) {
        self.sampling.seed = seed;
        self.bpr.seed = seed;
        self.wmf.seed = seed;
        self.pf.seed = seed;
    }
}

pub fn describe_point(point: &[(String, toml::Value)]) -> String {
    if point.is_empty() {
        return "defaults".to_string();
    }
    point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ")
}
