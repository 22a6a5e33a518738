//! Output files. The analysis writes `analysis.json`, `longtail.csv`, `profile_stats.csv` and
//! `groups.csv`; the report adds `report.json`, `table.csv`, `tradeoff.csv` and `manifest.json`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use poifair_core::dataset::{DatasetStats, InteractionStore, PoiIdx, UserIdx};
use poifair_core::metrics::{report_columns, FairnessReport};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::io::{sha256_hex, write_atomic};
use crate::pipeline::{Analysis, ArtifactRecord, Pipeline, RunReport};

pub const REPORT_FILE: &str = "report.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const LONGTAIL_FILE: &str = "longtail.csv";
pub const PROFILE_FILE: &str = "profile_stats.csv";
pub const GROUPS_FILE: &str = "groups.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Decimal places printed in `table.csv`.
const TABLE_DECIMALS: usize = 4;

/// Rank marks of one column: 1 for best, 2 for second best, 0 otherwise.
///
/// Higher is better. Ties share a mark; the second-best value is the largest one strictly below
/// the best. Missing values are never marked.
pub fn rank_marks(values: &[Option<f64>]) -> Vec<u8> {
    let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    values
        .iter()
        .map(|v| match v {
            Some(x) if Some(x) == distinct.first() => 1,
            Some(x) if Some(x) == distinct.get(1) => 2,
            _ => 0,
        })
        .collect()
}

/// Columns carrying best and second-best marks; the GCE columns carry the per-row highlight.
fn is_ranked_column(name: &str) -> bool {
    name.starts_with("NDCG@") || name.ends_with("1/MADr") || name.starts_with("AUC_")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn format_cell(v: Option<f64>, mark: u8, highlighted: bool) -> String {
    let Some(v) = v else { return "-".to_string() };
    let mut s = format!("{v:.TABLE_DECIMALS$}");
    s = match mark {
        1 => format!("**{s}**"),
        2 => format!("_{s}_"),
        _ => s,
    };
    if highlighted {
        s = format!("[{s}]");
    }
    s
}

/// One row per model. `**v**` marks the best value of a column, `_v_` the second best, and
/// `[v]` the target distribution with the smallest |GCE| in each row.
pub fn render_table(report: &FairnessReport) -> String {
    let cols = report_columns(report);
    let user_gce = "user GCE Pf";
    let item_gce = "item GCE Pf";
    let mut out = String::from("model");
    for (name, _) in &cols {
        out.push(',');
        out.push_str(&csv_field(name));
    }
    out.push('\n');
    let marks: Vec<Vec<u8>> = cols
        .iter()
        .map(|(name, values)| {
            if is_ranked_column(name) {
                rank_marks(values)
            } else {
                vec![0; values.len()]
            }
        })
        .collect();
    for (row, model) in report.models.iter().enumerate() {
        out.push_str(&csv_field(&model.model));
        for (c, (name, values)) in cols.iter().enumerate() {
            let highlighted = if let Some(i) = name.strip_prefix(user_gce) {
                model.user_highlight.map(|h| h.to_string()).as_deref() == Some(i)
            } else if let Some(i) = name.strip_prefix(item_gce) {
                model.item_highlight.map(|h| h.to_string()).as_deref() == Some(i)
            } else {
                false
            };
            out.push(',');
            out.push_str(&format_cell(values[row], marks[c][row], highlighted));
        }
        out.push('\n');
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Points of the three trade-off plots, three rows per model.
pub fn render_tradeoff(report: &FairnessReport) -> String {
    let scale = report.params.ndcg_scale;
    let mut out = String::from("model,plot,x,y\n");
    for m in &report.models {
        let x = Some(m.ndcg * scale);
        for (plot, a, b) in [
            ("accuracy-user", x, m.user_fairness),
            ("accuracy-item", x, m.item_fairness),
            ("user-item", m.user_fairness, m.item_fairness),
        ] {
            out.push_str(&format!("{},{plot},{},{}\n", csv_field(&m.model), num(a), num(b)));
        }
    }
    out
}

/// Contents of `analysis.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub stats: DatasetStats,
    pub user_thresholds: [u64; 3],
    pub item_shares: [f64; 3],
    /// Sizes of the very-inactive, slightly-inactive, slightly-active and very-active groups.
    pub user_group_sizes: [usize; 4],
    /// Sizes of the short-head, mid-tail and long-tail groups.
    pub item_group_sizes: [usize; 3],
    pub short_head_share: f64,
    pub pearson_size_popular: Option<f64>,
    pub pearson_size_mean_popularity: Option<f64>,
    pub users_with_unpopular: usize,
    pub users_with_unpopular_share: f64,
}

impl AnalysisSummary {
    pub fn new(analysis: &Analysis) -> Self {
        let n_users = analysis.stats.n_users.max(1) as f64;
        let n_pois = analysis.stats.n_pois.max(1) as f64;
        let p = &analysis.profiles;
        AnalysisSummary {
            stats: analysis.stats.clone(),
            user_thresholds: analysis.scheme.user_thresholds,
            item_shares: analysis.scheme.item_shares,
            user_group_sizes: analysis.user_group_sizes,
            item_group_sizes: analysis.item_group_sizes,
            short_head_share: analysis.item_group_sizes[0] as f64 / n_pois,
            pearson_size_popular: p.r_size_popular,
            pearson_size_mean_popularity: p.r_size_mean_popularity,
            users_with_unpopular: p.users_with_unpopular,
            users_with_unpopular_share: p.users_with_unpopular as f64 / n_users,
        }
    }
}

pub fn render_longtail(analysis: &Analysis, store: &InteractionStore) -> String {
    let totals = store.poi_totals();
    let mut order: Vec<PoiIdx> = (0..store.n_pois() as PoiIdx).collect();
    order.sort_by(|&a, &b| totals[b as usize].cmp(&totals[a as usize]).then(a.cmp(&b)));
    let mut out = String::from("rank,poi_id,checkins\n");
    for (&(rank, count), &poi) in analysis.longtail.iter().zip(&order) {
        let _ = writeln!(out, "{rank},{},{count}", csv_field(store.pois().name(poi)));
    }
    out
}

pub fn render_profiles(analysis: &Analysis, store: &InteractionStore) -> String {
    let mut out = String::from("user_id,group,checkins,profile_size,popular,unpopular_share,mean_popularity\n");
    for p in &analysis.profiles.profiles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(store.users().name(p.user)),
            p.group.label(),
            p.checkins,
            p.size,
            p.popular,
            p.unpopular_share(),
            p.mean_popularity
        );
    }
    out
}

pub fn render_groups(analysis: &Analysis, store: &InteractionStore) -> String {
    let mut out = String::from("kind,id,group\n");
    for (u, g) in analysis.scheme.user_group.iter().enumerate() {
        let _ = writeln!(out, "user,{},{}", csv_field(store.users().name(u as UserIdx)), g.label());
    }
    for (i, g) in analysis.scheme.item_group.iter().enumerate() {
        let _ = writeln!(out, "poi,{},{}", csv_field(store.pois().name(i as PoiIdx)), g.label());
    }
    out
}

fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

fn write(out_dir: &Path, name: &str, bytes: &[u8], artifacts: &mut Vec<ArtifactRecord>) -> Result<()> {
    let path = out_dir.join(name);
    write_atomic(&path, bytes).map_err(|source| HarnessError::Write {
        stage: "report".into(),
        path,
        source,
    })?;
    artifacts.push(ArtifactRecord {
        path: PathBuf::from(name),
        digest: sha256_hex(bytes),
    });
    Ok(())
}

fn write_analysis(pipeline: &mut Pipeline, artifacts: &mut Vec<ArtifactRecord>) -> Result<()> {
    let analysis: Analysis = pipeline.analyze()?.clone();
    let store = &pipeline.prep()?.store;
    let files = [
        (LONGTAIL_FILE, render_longtail(&analysis, store)),
        (PROFILE_FILE, render_profiles(&analysis, store)),
        (GROUPS_FILE, render_groups(&analysis, store)),
    ];
    let out_dir = pipeline.out_dir().to_path_buf();
    write(&out_dir, ANALYSIS_FILE, &pretty(&AnalysisSummary::new(&analysis)), artifacts)?;
    for (name, text) in files {
        write(&out_dir, name, text.as_bytes(), artifacts)?;
    }
    Ok(())
}

/// Writes the analysis files and returns their paths.
pub fn emit_analysis(pipeline: &mut Pipeline) -> Result<Vec<PathBuf>> {
    let mut artifacts = Vec::new();
    write_analysis(pipeline, &mut artifacts)?;
    Ok(artifacts.iter().map(|a| pipeline.out_dir().join(&a.path)).collect())
}

/// Runs whatever is still missing and writes every output file plus the manifest.
pub fn emit_report(pipeline: &mut Pipeline) -> Result<Vec<PathBuf>> {
    let report: RunReport = pipeline.run_report()?;
    let out_dir = pipeline.out_dir().to_path_buf();
    let mut artifacts = Vec::new();
    write_analysis(pipeline, &mut artifacts)?;
    write(&out_dir, REPORT_FILE, &pretty(&report), &mut artifacts)?;
    write(&out_dir, TABLE_FILE, render_table(&report.report).as_bytes(), &mut artifacts)?;
    write(&out_dir, TRADEOFF_FILE, render_tradeoff(&report.report).as_bytes(), &mut artifacts)?;
    let manifest = pipeline.manifest(artifacts);
    let mut unused = Vec::new();
    write(&out_dir, MANIFEST_FILE, &pretty(&manifest), &mut unused)?;
    let mut paths: Vec<PathBuf> = manifest.artifacts.iter().map(|a| out_dir.join(&a.path)).collect();
    paths.push(out_dir.join(MANIFEST_FILE));
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use poifair_core::metrics::{build_report, evaluate_model, MetricParams};
    use poifair_core::profiling::{GroupScheme, DEFAULT_ITEM_SHARES};
    use poifair_core::recommenders::{recommend, train_bpr, train_mostpop, BprParams, Exclusion, Scorer};
    use poifair_core::synthetic::{two_block_store, TwoBlock};

    fn report_for(models: &[(&str, &dyn Scorer)]) -> FairnessReport {
        let store = two_block_store(&TwoBlock::default());
        let scheme = GroupScheme::build(&store, [10, 15, 30], DEFAULT_ITEM_SHARES).unwrap();
        let params = MetricParams::default();
        let reports = models
            .iter()
            .map(|(name, m)| {
                let slates = recommend(*m, &store, params.k, Exclusion::TrainAndValidation);
                evaluate_model(name, &store, &scheme, &slates, &params).unwrap()
            })
            .collect();
        build_report(reports, &params)
    }

    fn unmark(cell: &str) -> (String, bool, bool, bool) {
        let highlighted = cell.starts_with('[');
        let c = cell.trim_start_matches('[').trim_end_matches(']');
        let best = c.starts_with("**");
        let second = !best && c.starts_with('_');
        (c.trim_matches('*').trim_matches('_').to_string(), best, second, highlighted)
    }

    #[test]
    fn marks_follow_a_resort() {
        assert_eq!(rank_marks(&[Some(1.0), Some(3.0), None, Some(2.0)]), vec![0, 1, 0, 2]);
        assert_eq!(rank_marks(&[Some(2.0), Some(2.0), Some(1.0)]), vec![1, 1, 2]);
        assert_eq!(rank_marks(&[Some(2.0)]), vec![1]);
        assert_eq!(rank_marks(&[None, None]), vec![0, 0]);
    }

    #[test]
    fn two_model_table_agrees_with_recomputed_maxima() {
        let store = two_block_store(&TwoBlock::default());
        let pop = train_mostpop(&store);
        let bpr = train_bpr(&store, &BprParams { dim: 4, ..Default::default() }).unwrap();
        let report = report_for(&[("mostpop", &pop), ("bpr", &bpr)]);
        let table = render_table(&report);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 3);
        let header: Vec<&str> = lines[0].split(',').collect();
        let rows: Vec<Vec<&str>> = lines[1..].iter().map(|l| l.split(',').collect()).collect();
        for (c, (name, values)) in report_columns(&report).iter().enumerate() {
            assert_eq!(header[c + 1], name);
            let max = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            for (r, row) in rows.iter().enumerate() {
                let (_, best, second, _) = unmark(row[c + 1]);
                if is_ranked_column(name) {
                    assert_eq!(best, values[r] == Some(max), "{name}");
                    assert_eq!(second, values[r].is_some() && values[r] != Some(max), "{name}");
                } else {
                    assert!(!best && !second, "{name}");
                }
            }
        }
        // the GCE highlight marks the smallest |GCE| of each side
        for (r, m) in report.models.iter().enumerate() {
            let cols = report_columns(&report);
            let marked: Vec<usize> = (0..cols.len()).filter(|&c| unmark(rows[r][c + 1]).3).collect();
            let user_col = 1 + m.user_highlight.unwrap();
            let item_col = 1 + report.params.user_targets.len() + 1 + m.item_highlight.unwrap();
            assert_eq!(marked, vec![user_col, item_col]);
        }
    }

    #[test]
    fn single_model_has_no_second_best() {
        let store = two_block_store(&TwoBlock::default());
        let report = report_for(&[("mostpop", &train_mostpop(&store))]);
        let table = render_table(&report);
        assert_eq!(table.lines().count(), 2);
        assert!(!table.lines().nth(1).unwrap().split(',').any(|c| unmark(c).2));
    }

    #[test]
    fn tradeoff_has_three_rows_per_model() {
        let store = two_block_store(&TwoBlock::default());
        let pop = train_mostpop(&store);
        let report = report_for(&[("a", &pop), ("b", &pop)]);
        let text = render_tradeoff(&report);
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[..2], ["a", "accuracy-user"]);
        assert_eq!(first[2].parse::<f64>().unwrap(), report.models[0].ndcg);
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
