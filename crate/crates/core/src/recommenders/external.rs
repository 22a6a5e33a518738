use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::RankedSlate;
use crate::dataset::{InteractionStore, UserIdx};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct Row {
    user_id: String,
    poi_id: String,
    rank: usize,
    score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedRankings {
    /// One slate per store user; users absent from the file get empty slates.
    pub slates: Vec<RankedSlate>,
    pub users_in_file: usize,
}

/// Reads `user_id,poi_id,rank,score` rankings produced by an outside model.
pub fn import_external_rankings(path: &Path, store: &InteractionStore) -> Result<ImportedRankings> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    {
        let headers = reader.headers()?;
        let expected = ["user_id", "poi_id", "rank", "score"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidInput(format!(
                "{}: header must be {}, got {:?}",
                path.display(),
                expected.join(","),
                headers
            )));
        }
    }

    let mut per_user: BTreeMap<UserIdx, Vec<(usize, u32, f64)>> = BTreeMap::new();
    let mut unknown_users = Vec::new();
    let mut unknown_pois = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        let user = store.users().get(&row.user_id);
        let poi = store.pois().get(&row.poi_id);
        if user.is_none() && !unknown_users.contains(&row.user_id) {
            unknown_users.push(row.user_id.clone());
        }
        if poi.is_none() && !unknown_pois.contains(&row.poi_id) {
            unknown_pois.push(row.poi_id.clone());
        }
        if let (Some(u), Some(p)) = (user, poi) {
            per_user.entry(u).or_default().push((row.rank, p, row.score));
        }
    }
    if !unknown_users.is_empty() || !unknown_pois.is_empty() {
        return Err(Error::UnknownIdentifiers {
            users: unknown_users,
            pois: unknown_pois,
        });
    }

    let users_in_file = per_user.len();
    let mut slates: Vec<RankedSlate> = (0..store.n_users() as UserIdx).map(RankedSlate::empty).collect();
    for (u, mut rows) in per_user {
        rows.sort_by_key(|r| r.0);
        let ranks: Vec<usize> = rows.iter().map(|r| r.0).collect();
        if ranks.iter().enumerate().any(|(i, &r)| r != i + 1) {
            return Err(Error::NonContiguousRanks {
                user: store.users().name(u).to_string(),
                ranks,
            });
        }
        let mut seen: Vec<u32> = rows.iter().map(|r| r.1).collect();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "user {}: duplicate POI in ranking",
                store.users().name(u)
            )));
        }
        slates[u as usize].entries = rows.into_iter().map(|(_, p, s)| (p, s)).collect();
    }
    Ok(ImportedRankings { slates, users_in_file })
}

/// Writes slates in the ranking exchange format. Users with empty slates produce no rows.
pub fn write_rankings(path: &Path, store: &InteractionStore, slates: &[RankedSlate]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "user_id,poi_id,rank,score").map_err(io)?;
    for slate in slates {
        for (rank, &(poi, score)) in slate.entries.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                csv_field(store.users().name(slate.user)),
                csv_field(store.pois().name(poi)),
                rank + 1,
                score
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommenders::{recommend, train_mostpop, Exclusion};
    use crate::synthetic::{two_block_store, TwoBlock};
    use std::fs;

    #[test]
    fn export_then_import_round_trips() {
        let store = two_block_store(&TwoBlock::default());
        let slates = recommend(&train_mostpop(&store), &store, 5, Exclusion::TrainAndValidation);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_rankings(&path, &store, &slates).unwrap();
        let back = import_external_rankings(&path, &store).unwrap();
        assert_eq!(back.slates, slates);
        assert_eq!(back.users_in_file, store.n_users());
    }

    #[test]
    fn rank_gap_rejected() {
        let store = two_block_store(&TwoBlock::default());
        let (u, p0, p1) = (store.users().name(0), store.pois().name(0), store.pois().name(1));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, format!("user_id,poi_id,rank,score\n{u},{p0},1,0.9\n{u},{p1},3,0.5\n")).unwrap();
        match import_external_rankings(&path, &store) {
            Err(Error::NonContiguousRanks { ranks, .. }) => assert_eq!(ranks, vec![1, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifiers_listed() {
        let store = two_block_store(&TwoBlock::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "user_id,poi_id,rank,score\nghost,nowhere,1,1.0\nghost,gone,2,0.5\n").unwrap();
        match import_external_rankings(&path, &store) {
            Err(Error::UnknownIdentifiers { users, pois }) => {
                assert_eq!(users, ["ghost"]);
                assert_eq!(pois, ["nowhere", "gone"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_required() {
        let store = two_block_store(&TwoBlock::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "a,b,1,1.0\n").unwrap();
        assert!(import_external_rankings(&path, &store).is_err());
    }
}
