//! The `poifair` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;
use poifair_core::recommenders::save_checkpoint;
use poifair_core::synthetic::CorpusSpec;

use crate::config::{load_config, LoadedConfig};
use crate::emit::{emit_analysis, emit_report};
use crate::error::{HarnessError, Result, EXIT_CONFIG};
use crate::io::write_atomic;
use crate::pipeline::Pipeline;
use crate::synth::synthesize;

#[derive(Debug, Parser)]
#[command(name = "poifair", version, about = "Accuracy and fairness evaluation of POI recommenders")]
pub struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true, default_value = "poifair.toml")]
    pub config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for sampling and every stochastic model.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fraction of users to keep, overriding `sampling.fraction`.
    #[arg(long, global = true)]
    pub sample: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest, filter, sample and split the data.
    Prep,
    /// Popularity profiles, groups and the long-tail curve.
    Analyze,
    /// Train one built-in model, selecting grid settings on the validation slice.
    Train { model: String },
    /// Write the test-time slates of one model.
    Recommend { model: String },
    /// Score every enabled model.
    Evaluate,
    /// Write the report files.
    Report,
    /// Every stage, then the report.
    Run,
    /// Regenerate the synthetic corpus at the configured dataset paths.
    Synth {
        #[arg(long, default_value_t = CorpusSpec::default().users)]
        users: usize,
        #[arg(long, default_value_t = CorpusSpec::default().pois)]
        pois: usize,
        #[arg(long, default_value_t = CorpusSpec::default().seed)]
        corpus_seed: u64,
    },
}

fn configure(cli: &Cli) -> Result<LoadedConfig> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.config.output_dir = std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.config.override_seed(seed);
    }
    if let Some(fraction) = cli.sample {
        cfg.config.sampling.fraction = fraction;
    }
    let problems = cfg.config.problems();
    if !problems.is_empty() {
        return Err(HarnessError::Config(problems));
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = configure(cli)?;
    if let Command::Synth { users, pois, corpus_seed } = &cli.command {
        let spec = CorpusSpec {
            users: *users,
            pois: *pois,
            seed: *corpus_seed,
            ..CorpusSpec::default()
        };
        for path in synthesize(&cfg, &spec)? {
            println!("{}", path.display());
        }
        return Ok(());
    }
    let mut pipeline = Pipeline::new(cfg)?;
    match &cli.command {
        Command::Prep => {
            let stats = pipeline.prep()?.store.stats();
            println!(
                "{} users, {} POIs, {} check-ins, {} social links",
                stats.n_users, stats.n_pois, stats.n_checkins, stats.n_social_links
            );
        }
        Command::Analyze => {
            for path in emit_analysis(&mut pipeline)? {
                println!("{}", path.display());
            }
        }
        Command::Train { model } => {
            let trained = pipeline.train(model)?.clone();
            for c in &trained.candidates {
                let mark = if c.setting == trained.candidates[trained.selected].setting { "*" } else { " " };
                println!("{mark} {}: validation NDCG {:?}", c.setting, c.validation_ndcg);
            }
            if let Some(factors) = &trained.factors {
                let path = pipeline.out_dir().join("models").join(format!("{model}.checkpoint.json"));
                std::fs::create_dir_all(path.parent().expect("has parent")).map_err(|source| HarnessError::Write {
                    stage: format!("train:{model}"),
                    path: path.clone(),
                    source,
                })?;
                save_checkpoint(factors, &path).map_err(|e| HarnessError::stage(format!("train:{model}"), e))?;
                println!("{}", path.display());
            }
        }
        Command::Recommend { model } => {
            let slates = pipeline.recommend(model)?.slates.clone();
            let store = &pipeline.prep()?.store;
            let mut text = String::from("user_id,poi_id,rank,score\n");
            for s in &slates {
                for (rank, &(poi, score)) in s.entries.iter().enumerate() {
                    text.push_str(&format!(
                        "{},{},{},{score}\n",
                        store.users().name(s.user),
                        store.pois().name(poi),
                        rank + 1
                    ));
                }
            }
            let path = pipeline.out_dir().join("rankings").join(format!("{model}.csv"));
            write_atomic(&path, text.as_bytes()).map_err(|source| HarnessError::Write {
                stage: format!("recommend:{model}"),
                path: path.clone(),
                source,
            })?;
            println!("{}", path.display());
        }
        Command::Evaluate => {
            let report = pipeline.evaluate()?;
            for m in &report.models {
                println!(
                    "{}: NDCG@{} {:.4}, user fairness {:?}, item fairness {:?}",
                    m.model, report.params.k, m.ndcg, m.user_fairness, m.item_fairness
                );
            }
        }
        Command::Report | Command::Run => {
            if matches!(cli.command, Command::Run) {
                pipeline.analyze()?;
            }
            for path in emit_report(&mut pipeline)? {
                println!("{}", path.display());
            }
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(HarnessError::Config(vec![format!("--threads {n}: {e}")])),
        },
        None => execute(&cli),
    };
    match outcome {
        Ok(()) => {
            info!("done");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::{MANIFEST_FILE, REPORT_FILE, TABLE_FILE};
    use crate::error::{EXIT_DATA, EXIT_NUMERIC};
    use crate::io::file_digest;
    use std::fs;
    use std::path::Path;

    const SMALL: &str = r#"
output_dir = "out"

[dataset]
checkins = "data/checkins.tsv"
social = "data/social.tsv"
categories = "data/categories.tsv"
min_user_checkins = 5
min_poi_visits = 3

[groups]
user_thresholds = [20, 40, 80]

[models]
enabled = ["mostpop", "bpr", "geosoca", "outside"]

[bpr]
dim = 4
steps_per_interaction = 5

[[external]]
name = "outside"
rankings = "data/outside.csv"
"#;

    fn setup(dir: &Path, config: &str) -> PathBuf {
        let path = dir.join("poifair.toml");
        fs::write(&path, config).unwrap();
        let spec = CorpusSpec {
            users: 40,
            pois: 80,
            ..CorpusSpec::default()
        };
        let cfg = load_config(&path).unwrap();
        synthesize(&cfg, &spec).unwrap();
        path
    }

    fn run(config: &Path, rest: &[&str]) -> i32 {
        let mut args = vec!["poifair".to_string(), "--config".into(), config.display().to_string()];
        args.extend(rest.iter().map(|s| s.to_string()));
        run_cli(args)
    }

    #[test]
    fn usage_and_config_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_cli(["poifair", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run_cli(["poifair", "--help"]), 0);
        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "[dataset]\ncheckins = \"x.tsv\"\n[bpr]\nlearnrate = 0.1\n").unwrap();
        assert_eq!(run(&bad, &["prep"]), EXIT_CONFIG);
        assert_eq!(run(&dir.path().join("absent.toml"), &["prep"]), EXIT_CONFIG);
        let ok = dir.path().join("ok.toml");
        fs::write(&ok, "[dataset]\ncheckins = \"x.tsv\"\n").unwrap();
        assert_eq!(run(&ok, &["--sample", "1.5", "prep"]), EXIT_CONFIG);
    }

    #[test]
    fn missing_data_exits_three() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("poifair.toml");
        fs::write(&cfg, "[dataset]\ncheckins = \"nowhere.tsv\"\n").unwrap();
        assert_eq!(run(&cfg, &["prep"]), EXIT_DATA);
    }

    #[test]
    fn diverging_training_exits_four() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), &SMALL.replace("steps_per_interaction = 5", "steps_per_interaction = 50\nlearning_rate = 1e6"));
        assert_eq!(run(&cfg, &["train", "bpr"]), EXIT_NUMERIC);
    }

    #[test]
    fn geosoca_without_categories_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        let text = fs::read_to_string(&cfg).unwrap().replace("categories = \"data/categories.tsv\"\n", "");
        fs::write(&cfg, text).unwrap();
        assert_eq!(run(&cfg, &["train", "geosoca"]), EXIT_DATA);
        assert_eq!(run(&cfg, &["train", "bpr"]), 0);
    }

    #[test]
    fn unknown_model_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        assert_eq!(run(&cfg, &["train", "knn"]), EXIT_CONFIG);
        assert_eq!(run(&cfg, &["train", "outside"]), EXIT_CONFIG);
    }

    #[test]
    fn stages_write_their_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        let out = dir.path().join("out");
        assert_eq!(run(&cfg, &["analyze"]), 0);
        for f in ["analysis.json", "longtail.csv", "profile_stats.csv", "groups.csv"] {
            assert!(out.join(f).exists(), "{f}");
        }
        assert_eq!(run(&cfg, &["train", "bpr"]), 0);
        assert!(out.join("models/bpr.checkpoint.json").exists());
        assert_eq!(run(&cfg, &["recommend", "outside"]), 0);
        let ranks = fs::read_to_string(out.join("rankings/outside.csv")).unwrap();
        assert!(ranks.lines().count() > 1);
        assert_eq!(run(&cfg, &["evaluate"]), 0);
        assert_eq!(run(&cfg, &["report"]), 0);
        let table = fs::read_to_string(out.join(TABLE_FILE)).unwrap();
        assert_eq!(table.lines().count(), 1 + 4);
    }

    fn digests(dir: &Path) -> Vec<(String, String)> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.is_file() && p.file_name().unwrap() != MANIFEST_FILE)
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), file_digest(&p).unwrap()))
            .collect();
        files.sort();
        files
    }

    #[test]
    fn reruns_hit_the_cache_and_reproduce_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        let out = dir.path().join("out");
        assert_eq!(run(&cfg, &["run"]), 0);
        let first = digests(&out);
        assert_eq!(run(&cfg, &["run"]), 0);
        assert_eq!(digests(&out), first);
        let manifest: crate::pipeline::RunManifest =
            serde_json::from_slice(&fs::read(out.join(MANIFEST_FILE)).unwrap()).unwrap();
        assert!(manifest.stages.iter().all(|s| s.cached));
        assert_eq!(manifest.artifacts.len(), first.len());
        for a in &manifest.artifacts {
            assert_eq!(file_digest(&out.join(&a.path)).unwrap(), a.digest);
        }

        // delete one cached stage output: it is recomputed bit for bit
        let stage = manifest.stages.iter().find(|s| s.stage == "train:bpr").unwrap();
        fs::remove_file(out.join(&stage.output)).unwrap();
        assert_eq!(run(&cfg, &["run"]), 0);
        assert_eq!(file_digest(&out.join(&stage.output)).unwrap(), stage.output_digest);
        assert_eq!(digests(&out), first);
    }

    #[test]
    fn separate_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        assert_eq!(run(&cfg, &["--out", dir.path().join("a").to_str().unwrap(), "run"]), 0);
        assert_eq!(run(&cfg, &["--out", dir.path().join("b").to_str().unwrap(), "--threads", "2", "run"]), 0);
        let a = digests(&dir.path().join("a"));
        assert_eq!(a, digests(&dir.path().join("b")));
        assert!(a.iter().any(|(f, _)| f == REPORT_FILE));
    }

    #[test]
    fn seed_override_changes_stochastic_models() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        let read = |sub: &str| fs::read(dir.path().join(sub).join(REPORT_FILE)).unwrap();
        assert_eq!(run(&cfg, &["--out", dir.path().join("a").to_str().unwrap(), "run"]), 0);
        assert_eq!(run(&cfg, &["--out", dir.path().join("b").to_str().unwrap(), "--seed", "7", "run"]), 0);
        assert_ne!(read("a"), read("b"));
    }

    #[test]
    fn unwritable_output_fails_before_any_work() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = setup(dir.path(), SMALL);
        let blocker = dir.path().join("blocker");
        fs::write(&blocker, "a file, not a directory").unwrap();
        assert_eq!(run(&cfg, &["--out", blocker.join("out").to_str().unwrap(), "run"]), EXIT_CONFIG);
        assert!(!dir.path().join("out").join(REPORT_FILE).exists());
    }
}
