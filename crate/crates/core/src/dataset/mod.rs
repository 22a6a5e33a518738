//! Check-in ingestion, cold-start filtering, and the per-user temporal split.

mod ingest;
mod preprocess;
mod sample;
mod split;
mod store;

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use ingest::{ingest, IngestReport, MalformedLine, RawCheckIn, RawEvents};
pub use preprocess::{preprocess, FilterMode};
pub use sample::sample_users;
pub use split::{temporal_split, SplitFractions};
pub use store::{CheckIn, DatasetStats, InteractionStore, PoiMeta, Split, UserSplit};

pub type UserIdx = u32;
pub type PoiIdx = u32;
pub type CategoryIdx = u32;

/// Orders identifiers numerically when both parse as integers, lexically otherwise.
/// Dense indices are assigned in this order, so index order equals identifier order.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Bidirectional map between opaque identifiers and contiguous indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    /// Builds a map whose indices follow [`compare_ids`] order. Duplicates collapse.
    pub fn sorted<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = ids.into_iter().map(Into::into).collect();
        names.sort_by(|a, b| compare_ids(a, b));
        names.dedup();
        IdMap::from(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, idx: u32) -> &str {
        &self.names[idx as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl From<Vec<String>> for IdMap {
    fn from(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        IdMap { names, index }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(map: IdMap) -> Self {
        map.names
    }
}
