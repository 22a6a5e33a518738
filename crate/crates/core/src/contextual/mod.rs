//! Context-aware scorers: geographic KDE, social and categorical influence, and sequential
//! transitions, fused multiplicatively into GeoSoCa- and LORE-style models.

mod categorical;
mod ecdf;
mod geo;
mod sequential;
mod social;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{InteractionStore, PoiIdx, UserIdx};
use crate::error::{Error, Result};
use crate::recommenders::{train_mostpop, MostPop, Scorer};

pub use categorical::CategoricalScorer;
pub use ecdf::{Ecdf, MAX_REFERENCE_VALUES};
pub use geo::{haversine_km, GeoParams, KdeModel, EARTH_RADIUS_KM};
pub use sequential::{history, TransitionModel};
pub use social::SocialScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextualKind {
    /// geo · social · categorical
    GeoSoCa,
    /// sequential · geo · social
    Lore,
}

impl ContextualKind {
    pub fn name(self) -> &'static str {
        match self {
            ContextualKind::GeoSoCa => "geosoca",
            ContextualKind::Lore => "lore",
        }
    }
}

/// Exponents applied to each normalized component before multiplying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionWeights {
    pub geo: f64,
    pub social: f64,
    pub categorical: f64,
    pub sequential: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            geo: 1.0,
            social: 1.0,
            categorical: 1.0,
            sequential: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextualParams {
    pub geo: GeoParams,
    pub weights: FusionWeights,
    /// Longest gap, in seconds, between check-ins counted as a transition.
    pub max_transition_gap: Option<i64>,
    pub recency_base: f64,
}

impl Default for ContextualParams {
    fn default() -> Self {
        ContextualParams {
            geo: GeoParams::default(),
            weights: FusionWeights::default(),
            max_transition_gap: None,
            recency_base: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Geo,
    Social,
    Categorical,
    Sequential,
}

impl ComponentKind {
    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::Geo => "geo",
            ComponentKind::Social => "social",
            ComponentKind::Categorical => "categorical",
            ComponentKind::Sequential => "sequential",
        }
    }
}

/// One component for one user, scaled so its maximum over the catalog is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub kind: ComponentKind,
    /// No usable signal for this user: every value is 1.
    pub neutral: bool,
    pub values: Vec<f64>,
}

/// Components that carried no signal for a user, and whether the popularity fallback was used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserFlags {
    pub geo: bool,
    pub social: bool,
    pub categorical: bool,
    pub sequential: bool,
    pub fallback: bool,
}

/// Weighted product `Π_c value_c^w_c`, written into `out`.
pub fn fuse(components: &[(&[f64], f64)], out: &mut [f64]) {
    out.fill(1.0);
    for &(values, w) in components {
        for (o, &v) in out.iter_mut().zip(values) {
            *o *= if w == 1.0 { v } else { v.powf(w) };
        }
    }
}

/// Divides by the maximum. Returns false when there is no positive value.
fn normalize(values: &mut [f64]) -> bool {
    let max = values.iter().copied().fold(0.0, f64::max);
    if max > 0.0 && max.is_finite() {
        values.iter_mut().for_each(|v| *v /= max);
        true
    } else {
        false
    }
}

pub struct ContextualModel {
    kind: ContextualKind,
    params: ContextualParams,
    n_pois: usize,
    locations: Vec<(f64, f64)>,
    kde: Vec<Option<KdeModel>>,
    social: SocialScorer,
    categorical: Option<CategoricalScorer>,
    transitions: Option<TransitionModel>,
    histories: Vec<Vec<PoiIdx>>,
    fallback: MostPop,
    flags: Vec<UserFlags>,
}

impl ContextualModel {
    /// Builds from the training partition. GeoSoCa needs category data.
    pub fn build(kind: ContextualKind, store: &InteractionStore, params: &ContextualParams) -> Result<Self> {
        if params.recency_base <= 0.0 || !params.recency_base.is_finite() {
            return Err(Error::InvalidInput(format!("recency base must be positive, got {}", params.recency_base)));
        }
        let categorical = match kind {
            ContextualKind::GeoSoCa => Some(CategoricalScorer::build(store)?),
            ContextualKind::Lore => None,
        };
        let locations: Vec<(f64, f64)> = (0..store.n_pois() as PoiIdx)
            .map(|p| {
                let m = store.poi_meta(p);
                (m.lat, m.lon)
            })
            .collect();
        let kde = (0..store.n_users() as UserIdx)
            .into_par_iter()
            .map(|u| {
                let pts: Vec<((f64, f64), f64)> = store
                    .train_interactions(u)
                    .into_iter()
                    .map(|(p, c)| (locations[p as usize], c as f64))
                    .collect();
                KdeModel::fit(&pts, &params.geo)
            })
            .collect();
        let social = SocialScorer::build(store);
        let (transitions, histories) = match kind {
            ContextualKind::Lore => (
                Some(TransitionModel::build(store, params.max_transition_gap, params.recency_base)),
                (0..store.n_users() as UserIdx)
                    .map(|u| history(store, u).into_iter().map(|(p, _)| p).collect())
                    .collect(),
            ),
            ContextualKind::GeoSoCa => (None, Vec::new()),
        };

        let mut model = ContextualModel {
            kind,
            params: params.clone(),
            n_pois: store.n_pois(),
            locations,
            kde,
            social,
            categorical,
            transitions,
            histories,
            fallback: train_mostpop(store),
            flags: Vec::new(),
        };
        model.flags = (0..store.n_users() as UserIdx).map(|u| model.user_flags(u)).collect();
        let fallbacks = model.flags.iter().filter(|f| f.fallback).count();
        info!("{}: {} of {} users fall back to popularity", kind.name(), fallbacks, store.n_users());
        Ok(model)
    }

    pub fn kind(&self) -> ContextualKind {
        self.kind
    }

    pub fn params(&self) -> &ContextualParams {
        &self.params
    }

    pub fn flags(&self) -> &[UserFlags] {
        &self.flags
    }

    pub fn kde(&self, user: UserIdx) -> Option<&KdeModel> {
        self.kde[user as usize].as_ref()
    }

    fn kinds(&self) -> &'static [ComponentKind] {
        match self.kind {
            ContextualKind::GeoSoCa => &[ComponentKind::Geo, ComponentKind::Social, ComponentKind::Categorical],
            ContextualKind::Lore => &[ComponentKind::Sequential, ComponentKind::Geo, ComponentKind::Social],
        }
    }

    fn weight(&self, kind: ComponentKind) -> f64 {
        let w = &self.params.weights;
        match kind {
            ComponentKind::Geo => w.geo,
            ComponentKind::Social => w.social,
            ComponentKind::Categorical => w.categorical,
            ComponentKind::Sequential => w.sequential,
        }
    }

    fn raw_component(&self, kind: ComponentKind, user: UserIdx, out: &mut [f64]) -> bool {
        match kind {
            ComponentKind::Geo => match &self.kde[user as usize] {
                Some(kde) => {
                    for (o, &loc) in out.iter_mut().zip(&self.locations) {
                        *o = kde.density(loc);
                    }
                    true
                }
                None => false,
            },
            ComponentKind::Social => {
                self.social.score_into(user, out);
                true
            }
            ComponentKind::Categorical => match &self.categorical {
                Some(c) => {
                    c.score_into(user, out);
                    true
                }
                None => false,
            },
            ComponentKind::Sequential => match &self.transitions {
                Some(t) => {
                    t.score_into(&self.histories[user as usize], out);
                    true
                }
                None => false,
            },
        }
    }

    /// Per-user normalized components; a component without any positive value is neutral.
    pub fn components(&self, user: UserIdx) -> Vec<Component> {
        self.kinds()
            .iter()
            .map(|&kind| {
                let mut values = vec![0.0; self.n_pois];
                let informative = self.raw_component(kind, user, &mut values) && normalize(&mut values);
                if !informative {
                    values.fill(1.0);
                }
                Component {
                    kind,
                    neutral: !informative,
                    values,
                }
            })
            .collect()
    }

    /// Cheap structural check matching `components(user)[..].neutral`.
    fn user_flags(&self, user: UserIdx) -> UserFlags {
        let u = user as usize;
        let mut f = UserFlags {
            geo: self.kde[u].is_none(),
            social: self.social.raw(user).is_empty(),
            categorical: self.categorical.as_ref().is_some_and(|c| !c.has_affinity(user)),
            sequential: self.transitions.as_ref().is_some_and(|t| {
                self.histories[u].iter().all(|&p| t.row(p).is_empty())
            }),
            fallback: false,
        };
        f.fallback = self.kinds().iter().all(|k| match k {
            ComponentKind::Geo => f.geo,
            ComponentKind::Social => f.social,
            ComponentKind::Categorical => f.categorical,
            ComponentKind::Sequential => f.sequential,
        });
        f
    }
}

impl Scorer for ContextualModel {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        let comps = self.components(user);
        if comps.iter().all(|c| c.neutral) {
            self.fallback.score_into(user, out);
            return;
        }
        let weighted: Vec<(&[f64], f64)> = comps
            .iter()
            .map(|c| (c.values.as_slice(), self.weight(c.kind)))
            .collect();
        fuse(&weighted, out);
    }
}
