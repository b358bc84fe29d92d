//! Exit codes and observable behaviour of the `hatebench` binary.

mod common;

use std::fs;

use common::{ok, stderr, stdout, Toy, ALL_SCENARIOS};
use hatebench::scenarios::{RunStatus, ScenarioKind, MANIFEST_FILE};

fn code(o: &std::process::Output) -> i32 {
    o.status.code().expect("process exited normally")
}

fn ingested() -> Toy {
    let toy = Toy::new();
    ok(&toy.cli(&["ingest"]));
    toy
}

#[test]
fn help_and_bad_arguments() {
    let toy = Toy::new();
    assert_eq!(code(&toy.cli(&["--help"])), 0);
    assert_eq!(code(&toy.cli(&["frobnicate"])), 1);
    assert_eq!(code(&toy.cli(&["report", "--axis", "diagonal"])), 1);
}

#[test]
fn missing_config_is_a_validation_error() {
    let toy = Toy::new();
    let o = toy.cli(&["--config", "nope.toml", "ingest"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nope.toml"));
}

#[test]
fn missing_source_file_writes_nothing() {
    let toy = Toy::new();
    fs::remove_file(toy.path().join("raw/xc_binary.csv")).unwrap();
    let o = toy.cli(&["ingest"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("xc-binary"), "{}", stderr(&o));
    assert!(!toy.path().join("corpus").exists());
}

#[test]
fn missing_hydration_file_is_reported() {
    let toy = Toy::new();
    fs::remove_file(toy.path().join("raw/xb_hydration.jsonl")).unwrap();
    let o = toy.cli(&["ingest", "xb"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hydration"));
}

#[test]
fn ingest_selected_language_only() {
    let toy = Toy::new();
    let out = ok(&toy.cli(&["ingest", "xc"]));
    assert!(out.starts_with("xc: 105 records"), "{out}");
    assert!(toy.path().join("corpus/xc.jsonl").is_file());
    assert!(!toy.path().join("corpus/xa.jsonl").exists());
    assert_eq!(code(&toy.cli(&["ingest", "zz"])), 1);
}

#[test]
fn reingest_is_byte_identical() {
    let toy = ingested();
    let first = fs::read(toy.path().join("corpus/xb.jsonl")).unwrap();
    let stats = fs::read(toy.path().join("corpus/xb.stats.json")).unwrap();
    ok(&toy.cli(&["ingest"]));
    assert_eq!(fs::read(toy.path().join("corpus/xb.jsonl")).unwrap(), first);
    assert_eq!(fs::read(toy.path().join("corpus/xb.stats.json")).unwrap(), stats);
}

#[test]
fn unknown_model_lists_families() {
    let toy = ingested();
    toy.write("scenarios/bad.toml", "kind = \"monolingual\"\nmodel = \"svm\"\n");
    let o = toy.cli(&["run", "scenarios/bad.toml"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    for family in ["linear_head", "cnn_gru", "contextual_finetune"] {
        assert!(err.contains(family), "{err}");
    }
    assert!(!toy.runs_dir().exists() || toy.manifests().is_empty());
}

#[test]
fn unknown_family_and_unknown_keys() {
    let toy = ingested();
    toy.write("scenarios/f.toml", "kind = \"language_family\"\nfamily = \"slavic\"\nmodel = \"linear_head\"\n");
    let o = toy.cli(&["run", "scenarios/f.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("toyfam"), "{}", stderr(&o));

    toy.write("scenarios/k.toml", "kind = \"monolingual\"\nmodel = \"linear_head\"\nepochz = 3\n");
    assert_eq!(code(&toy.cli(&["run", "scenarios/k.toml"])), 1);
}

#[test]
fn run_before_ingest_is_a_validation_error() {
    let toy = Toy::new();
    let o = toy.cli(&["run", "scenarios/monolingual.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("ingest"), "{}", stderr(&o));
}

#[test]
fn backend_granularity_mismatch() {
    let toy = ingested();
    let o = toy.cli(&["--backend", "mock-token", "run", "scenarios/monolingual.toml"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = toy.cli(&["--backend", "nosuch", "run", "scenarios/monolingual.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mock-sentence"));
}

#[test]
fn rerun_requires_force() {
    let toy = ingested();
    ok(&toy.cli(&["run", "scenarios/multilingual.toml"]));
    let before = toy.manifests();
    assert_eq!(before.len(), 1);

    let o = toy.cli_now(&["run", "scenarios/multilingual.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--force"));
    assert_eq!(toy.manifests(), before);

    ok(&toy.cli_now(&["--force", "run", "scenarios/multilingual.toml"]));
    let after = toy.manifests();
    assert_eq!(after.len(), 1);
    assert_ne!(after[0].run_id, before[0].run_id);
    assert!(!toy.runs_dir().join(&before[0].run_id).exists());

    // A different seed is a different run, no collision.
    ok(&toy.cli(&["--seed", "99", "run", "scenarios/multilingual.toml"]));
    assert_eq!(toy.manifests().len(), 2);
}

#[test]
fn divergence_is_a_runtime_failure_with_failed_artifacts() {
    let toy = ingested();
    // AdamW moves a weight by about lr per step, so only an f64 overflow diverges.
    toy.write(
        "scenarios/boom.toml",
        "kind = \"multilingual\"\nmodel = \"linear_head\"\n[train]\nlearning_rate = 1e307\nepochs = 3\n",
    );
    let o = toy.cli(&["run", "scenarios/boom.toml"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("train"), "{}", stderr(&o));
    let manifests = toy.manifests();
    assert_eq!(manifests.len(), 1);
    let m = &manifests[0];
    assert_eq!(m.status, RunStatus::Failed);
    assert_eq!(m.error.as_ref().unwrap().stage, "train");
    let dir = toy.runs_dir().join(&m.run_id);
    assert!(dir.join(MANIFEST_FILE).is_file());
    assert!(dir.join("failed").is_dir());
    assert!(!dir.join("report.md").exists());

    // Failed runs never reach a report.
    assert_eq!(code(&toy.cli(&["report"])), 1);
}

#[test]
fn report_without_runs() {
    let toy = ingested();
    let o = toy.cli(&["report"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no matching runs"));
}

#[test]
fn report_filters_and_output_file() {
    let toy = ingested();
    for s in ALL_SCENARIOS {
        ok(&toy.cli(&["run", s]));
    }
    let mono = ok(&toy.cli(&["report", "--kind", "monolingual"]));
    assert!(mono.contains("Monolingual") && !mono.contains("Multilingual"), "{mono}");

    let solo = ok(&toy.cli(&["report", "--family", "solo", "--format", "markdown", "--output", "solo.md"]));
    assert_eq!(fs::read_to_string(toy.path().join("solo.md")).unwrap(), solo);
    assert!(solo.contains("| xc |") && !solo.contains("| xa |"), "{solo}");

    let by_model = ok(&toy.cli(&["report", "--axis", "model"]));
    assert!(by_model.contains("Weighted F1 by model"), "{by_model}");

    let multi = toy.manifests().into_iter().find(|m| m.scenario.kind == ScenarioKind::Multilingual).unwrap();
    let hash = multi.run_id.split_once('-').unwrap().1;
    let one = ok(&toy.cli(&["report", hash]));
    assert!(one.contains(&multi.run_id) && one.lines().filter(|l| l.contains("manifest.json")).count() == 3, "{one}");

    assert_eq!(code(&toy.cli(&["report", "--model", "svm"])), 1);
    assert_eq!(code(&toy.cli(&["report", "--model", "cnn_gru"])), 1);
}

#[test]
fn report_refuses_mixed_corpus_snapshots() {
    let toy = ingested();
    ok(&toy.cli(&["run", "scenarios/monolingual.toml"]));
    // Alter the xc corpus, then produce a second xc result on the new snapshot.
    let path = toy.path().join("raw/xc_binary.csv");
    let mut body = fs::read_to_string(&path).unwrap();
    body.push_str("an extra calm line about gardens,0\n");
    fs::write(&path, body).unwrap();
    ok(&toy.cli(&["ingest", "xc"]));
    ok(&toy.cli(&["run", "scenarios/family_solo.toml"]));
    let o = toy.cli(&["report"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("xc"), "{}", stderr(&o));
}

#[test]
fn parallel_jobs_match_sequential() {
    let a = ingested();
    let b = ingested();
    ok(&a.cli(&["run", "scenarios/monolingual.toml"]));
    ok(&b.cli(&["--jobs", "3", "run", "scenarios/monolingual.toml"]));
    let (ma, mb) = (a.manifests(), b.manifests());
    assert_eq!(ma.len(), 3);
    for (x, y) in ma.iter().zip(&mb) {
        assert_eq!(x.run_id, y.run_id);
        assert_eq!(x.results, y.results);
        assert_eq!(x.history, y.history);
    }
}

#[test]
fn stats_command() {
    let toy = Toy::new();
    assert_eq!(code(&toy.cli(&["stats"])), 1);
    ok(&toy.cli(&["ingest"]));
    let out = ok(&toy.cli(&["stats"]));
    assert!(out.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["xa", "99", "43", "0.434", "7"]), "{out}");
    assert!(out.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", "309", "133"]), "{out}");
    let reference = ok(&toy.cli(&["stats", "--reference"]));
    assert!(reference.contains("no built-in languages"), "{reference}");

    // A sidecar that disagrees with its corpus is a runtime error.
    let sidecar = toy.path().join("corpus/xc.stats.json");
    let text = fs::read_to_string(&sidecar).unwrap().replace("\"n_examples\": 105", "\"n_examples\": 104");
    fs::write(&sidecar, text).unwrap();
    let o = toy.cli(&["stats", "xc"]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn environment_overrides_config() {
    let toy = Toy::new();
    let o = toy.cli_env(&["ingest", "xc"], &[("HATEBENCH_CORPUS_DIR", "elsewhere")]);
    ok(&o);
    assert!(toy.path().join("elsewhere/xc.jsonl").is_file());
    assert_eq!(code(&toy.cli_env(&["ingest"], &[("HATEBENCH_TEST_RATIO", "lots")])), 1);
}
