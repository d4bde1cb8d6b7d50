use std::fs;
use std::path::{Path, PathBuf};

use symbed_core::classify::HyperGrid;
use symbed_core::config::{CvConfig, RunConfig};
use symbed_core::corpus::{
    corpus_summary, load_corpus, parse_corpus_csv, save_corpus, to_canonical_json,
    write_propositions, CorpusFormat,
};
use symbed_core::embed::{BackendRegistry, EmbeddingCache, ModelSpec};
use symbed_core::report::{render_all, write_run_directory, EvaluationBundle};
use symbed_core::runner::{new_bundle, open_cache, run_mlbench, run_simeval};
use symbed_core::simeval::similarity_table;
use symbed_core::synthetic::{separable_propositions, synthetic_corpus};

fn repo_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

const CSV: &str = "\
id,task_source,se,lt,ilt,rc,irc,ot
cm-001,concept_map,V=AXT,velocity equals acceleration times time,velocity equals acceleration divided by time,uniformly accelerated motion,uniform circular motion,apple pie recipe
ps-001,problem_solving,v=sqrt(g*r),velocity equals the square root of gravitational acceleration times radius,velocity equals the square of gravitational acceleration times radius,,,apple pie recipe
";

#[test]
fn csv_import_then_canonical_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = parse_corpus_csv(Path::new("pairs.csv"), CSV).unwrap();
    assert_eq!(corpus.records.len(), 2);
    assert!(corpus.records[1].rc.is_none() && corpus.records[1].irc.is_none());
    let path = dir.path().join("pairs.json");
    save_corpus(&path, &corpus).unwrap();
    let first = fs::read_to_string(&path).unwrap();
    let reloaded = load_corpus(&path, CorpusFormat::Json).unwrap();
    assert_eq!(reloaded, corpus);
    assert_eq!(to_canonical_json(&reloaded), first);
}

#[test]
fn shipped_example_corpus_is_valid() {
    let corpus = load_corpus(&repo_data("example-corpus.json"), CorpusFormat::Json).unwrap();
    let s = corpus_summary(&corpus);
    assert_eq!(
        (s.n, s.concept_map, s.problem_solving, s.rc_pairs),
        (4, 2, 2, 3)
    );
    let spec = ModelSpec::mock("mock", 16);
    let backend = BackendRegistry::with_builtin().build(&spec).unwrap();
    let rows = similarity_table(
        &corpus,
        &spec,
        backend.as_ref(),
        &mut EmbeddingCache::in_memory(),
    )
    .unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r.record_id.as_str()).collect();
    assert_eq!(ids, ["cm-001", "cm-002", "ps-001", "ps-002"]);
    assert!(rows[2].s_rc.is_none());
    assert!(rows.iter().all(|r| (-1.0..=1.0).contains(&r.s_lt)));
}

#[test]
fn shipped_sample_matches_generator() {
    let on_disk = fs::read_to_string(repo_data("synthetic-corpus.json")).unwrap();
    assert_eq!(on_disk, to_canonical_json(&synthetic_corpus(200, 0)));
}

fn mock_config(dir: &Path) -> RunConfig {
    save_corpus(&dir.join("corpus.json"), &synthetic_corpus(40, 2)).unwrap();
    write_propositions(&dir.join("props.jsonl"), &separable_propositions(60, 2, 9)).unwrap();
    let models = [8, 12]
        .into_iter()
        .map(|d| ModelSpec {
            mock_seed: Some(9),
            ..ModelSpec::mock(format!("m{d}"), d)
        })
        .collect();
    RunConfig {
        corpus: "corpus.json".into(),
        propositions: Some("props.jsonl".into()),
        models,
        cache: "cache.jsonl".into(),
        seed: 5,
        cv: CvConfig {
            outer_folds: 3,
            inner_folds: 3,
        },
        grid: HyperGrid {
            c: vec![1.0, 10.0],
            ..HyperGrid::default()
        },
        out_dir: "runs".into(),
        base_dir: dir.to_path_buf(),
    }
}

fn full_run(cfg: &RunConfig) -> EvaluationBundle {
    let registry = BackendRegistry::with_builtin();
    let mut cache = open_cache(cfg).unwrap();
    let mut bundle = new_bundle(cfg);
    assert!(run_simeval(cfg, &registry, &mut cache, &mut bundle)
        .unwrap()
        .all_succeeded());
    assert!(run_mlbench(cfg, &registry, &mut cache, &mut bundle)
        .unwrap()
        .all_succeeded());
    bundle
}

#[test]
fn both_arms_fill_the_bundle_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mock_config(dir.path());
    let a = full_run(&cfg);
    let b = full_run(&cfg);
    assert_eq!(a.to_json(), b.to_json());
    for m in &a.models {
        let sim = m.simeval.as_ref().unwrap();
        assert_eq!(sim.similarity_rows.len(), 40);
        let clf = m.classifier.as_ref().unwrap();
        assert_eq!(clf.predictions.len(), 60);
        assert_eq!(clf.folds.len(), 3);
    }

    let run = dir.path().join("run");
    write_run_directory(&run, &a).unwrap();
    let reloaded = EvaluationBundle::load(&run.join("bundle.json")).unwrap();
    assert_eq!(render_all(&reloaded), render_all(&a));
    for (name, text) in render_all(&a) {
        assert_eq!(fs::read_to_string(run.join(&name)).unwrap(), text, "{name}");
    }
}
