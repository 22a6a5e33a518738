use poifair_core::contextual::{ContextualKind, ContextualModel, ContextualParams};
use poifair_core::dataset::{preprocess, temporal_split, FilterMode, InteractionStore, RawCheckIn, RawEvents, SplitFractions, UserIdx};
use poifair_core::metrics::{evaluate_model, MetricParams};
use poifair_core::profiling::{GroupScheme, DEFAULT_ITEM_SHARES};
use poifair_core::recommenders::{excluded_items, recommend, train_mostpop, Exclusion, Scorer};
use poifair_core::synthetic::{generate_corpus, CorpusSpec};
use proptest::prelude::*;

/// Scores drawn from a fixed table, so ties and arbitrary orders both show up.
struct Table(Vec<Vec<f64>>);

impl Scorer for Table {
    fn name(&self) -> &str {
        "table"
    }

    fn score_into(&self, user: UserIdx, out: &mut [f64]) {
        out.copy_from_slice(&self.0[user as usize]);
    }
}

fn store_from(visits: &[(u8, u8)]) -> Option<InteractionStore> {
    let checkins = visits
        .iter()
        .enumerate()
        .map(|(t, &(u, p))| RawCheckIn { user: format!("u{u}"), poi: format!("p{p}"), lat: 0.0, lon: 0.0, when: t as i64 })
        .collect();
    let store = preprocess(&RawEvents::from_checkins(checkins), 1, 1, FilterMode::SinglePass).ok()?;
    temporal_split(&store, SplitFractions::default()).ok()
}

fn score_table(store: &InteractionStore, raw: &[i8]) -> Table {
    let n = store.n_pois();
    Table(
        (0..store.n_users())
            .map(|u| (0..n).map(|i| raw[(u * n + i) % raw.len()] as f64).collect())
            .collect(),
    )
}

proptest! {
    #[test]
    fn slates_never_contain_known_items(
        visits in prop::collection::vec((0u8..8, 0u8..15), 1..80),
        raw in prop::collection::vec(-3i8..4, 1..64),
        k in 1usize..12,
    ) {
        let Some(store) = store_from(&visits) else { return Ok(()) };
        let model = score_table(&store, &raw);
        for slate in recommend(&model, &store, k, Exclusion::TrainAndValidation) {
            let u = slate.user;
            let train = store.train_items(u);
            prop_assert!(slate.len() <= k);
            for p in slate.items() {
                prop_assert!(!train.contains(&p));
                prop_assert!(!store.validation_items(u).contains(&p));
            }
            // slates are as long as the candidate set allows
            let excluded = excluded_items(&store, u, Exclusion::TrainAndValidation);
            let admissible = store.n_pois() - excluded.len();
            prop_assert_eq!(slate.len(), admissible.min(k));
        }
        for slate in recommend(&model, &store, k, Exclusion::TrainOnly) {
            let train = store.train_items(slate.user);
            prop_assert!(slate.items().all(|p| !train.contains(&p)));
        }
    }

    #[test]
    fn slates_depend_only_on_score_order(
        visits in prop::collection::vec((0u8..6, 0u8..12), 1..60),
        raw in prop::collection::vec(-3i8..4, 1..40),
        a in 0.01f64..50.0,
        b in -10.0f64..10.0,
    ) {
        let Some(store) = store_from(&visits) else { return Ok(()) };
        let base = score_table(&store, &raw);
        let moved = Table(base.0.iter().map(|r| r.iter().map(|s| (a * s + b).exp()).collect()).collect());
        let x = recommend(&base, &store, 5, Exclusion::TrainAndValidation);
        let y = recommend(&moved, &store, 5, Exclusion::TrainAndValidation);
        for (s, t) in x.iter().zip(&y) {
            prop_assert_eq!(s.items().collect::<Vec<_>>(), t.items().collect::<Vec<_>>());
        }
    }
}

#[test]
fn contextual_models_run_on_the_synthetic_corpus() {
    let spec = CorpusSpec { users: 80, pois: 200, ..Default::default() };
    let events = generate_corpus(&spec).unwrap();
    let store = preprocess(&events, 5, 5, FilterMode::SinglePass).unwrap();
    let store = temporal_split(&store, SplitFractions::default()).unwrap();
    let scheme = GroupScheme::build(&store, [20, 40, 80], DEFAULT_ITEM_SHARES).unwrap();
    let params = MetricParams::default();
    let pop = train_mostpop(&store);
    let pop_slates = recommend(&pop, &store, params.k, Exclusion::TrainAndValidation);
    let pop_report = evaluate_model("mostpop", &store, &scheme, &pop_slates, &params).unwrap();

    for kind in [ContextualKind::GeoSoCa, ContextualKind::Lore] {
        let model = ContextualModel::build(kind, &store, &ContextualParams::default()).unwrap();
        let slates = recommend(&model, &store, params.k, Exclusion::TrainAndValidation);
        assert!(slates.iter().flat_map(|s| s.entries.iter()).all(|&(_, s)| s.is_finite() && s >= 0.0));
        let report = evaluate_model(kind.name(), &store, &scheme, &slates, &params).unwrap();
        assert!(report.ndcg > 0.0, "{} scored nothing", kind.name());
        // geography and friends spread exposure beyond the head
        assert!(report.item_pm.probs[0] < pop_report.item_pm.probs[0], "{}: {:?}", kind.name(), report.item_pm.probs);
    }
}
