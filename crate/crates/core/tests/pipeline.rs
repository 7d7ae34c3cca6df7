use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use salience::pipeline::{RunManifest, MANIFEST_FILE};
use salience::synthetic::FIXTURE_COUNTS;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn salience(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_salience"))
        .current_dir(manifest_dir())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn full_run() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = salience(&["run", "--config", "fixtures/run_fixture.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    dir
}

fn csv_totals(path: &Path) -> BTreeMap<String, u64> {
    let mut totals = BTreeMap::new();
    for row in csv::Reader::from_path(path).unwrap().records() {
        let row = row.unwrap();
        *totals.entry(row[0].to_string()).or_insert(0) += row[3].parse::<u64>().unwrap();
    }
    totals
}

#[test]
fn fixture_run_counts_and_tables_agree() {
    let dir = full_run();
    let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, "ok");
    let c = &m.counts;
    assert_eq!(c["raw_comments"], FIXTURE_COUNTS.raw as u64);
    assert_eq!(c["deduped"], FIXTURE_COUNTS.deduped as u64);
    assert_eq!(c["in_window"], FIXTURE_COUNTS.in_window as u64);
    assert_eq!(c["out_of_window"], FIXTURE_COUNTS.out_of_window as u64);
    assert_eq!(c["embedded"], FIXTURE_COUNTS.embeddable as u64);
    assert_eq!(c["excluded_degenerate_text"], FIXTURE_COUNTS.degenerate as u64);
    assert_eq!(c["top_level"] + c["replies"], c["deduped"]);
    assert_eq!(c["labeled"] + c["excluded"], c["deduped"]);
    let by_class: u64 = c.iter().filter(|(k, _)| k.starts_with("excluded_")).map(|(_, v)| v).sum();
    assert_eq!(by_class, c["excluded"]);
    assert_eq!(c["excluded_noise"], c["noise"]);

    let stats: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("stats.json")).unwrap()).unwrap();
    for (method, file) in [("keyword", "counts_keyword.csv"), ("cluster", "counts_cluster.csv")] {
        let want: BTreeMap<String, u64> = serde_json::from_value(stats[method]["counts"].clone()).unwrap();
        assert_eq!(csv_totals(&dir.path().join(file)), want, "{method}");
    }
    let cluster_total: u64 = csv_totals(&dir.path().join("counts_cluster.csv")).values().sum();
    assert_eq!(cluster_total, c["labeled"]);
    for (name, hash) in &m.outputs {
        assert_eq!(&salience::pipeline::sha256_file(&dir.path().join(name)).unwrap(), hash, "{name}");
    }
}

#[test]
fn single_stage_rerun_reproduces_outputs() {
    let dir = full_run();
    let before = fs::read(dir.path().join("labels.json")).unwrap();
    let stats = fs::read(dir.path().join("stats.json")).unwrap();
    fs::remove_file(dir.path().join("labels.json")).unwrap();
    let (code, err) = salience(&["label", "--config", "fixtures/run_fixture.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(dir.path().join("labels.json")).unwrap(), before);
    let (code, err) = salience(&["run", "--stage", "stats", "--config", "fixtures/run_fixture.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(dir.path().join("stats.json")).unwrap(), stats);
    fs::remove_file(dir.path().join("fig2_keyword_totals.svg")).unwrap();
    let (code, err) = salience(&["report", "--config", "fixtures/run_fixture.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("fig2_keyword_totals.svg").exists());
}

#[test]
fn exit_codes_for_configuration_problems() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = salience(&["run", "--config", "fixtures/no_such_config.json"], dir.path());
    assert_eq!(code, 2, "{err}");
    let (code, err) = salience(&["stats", "--config", "fixtures/run_fixture.json"], dir.path());
    assert_eq!(code, 2, "{err}");
    let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.status, "FAILED");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"corpus": "x.jsonl", "clusterer": {"min_cluster_size": 1}}"#).unwrap();
    let (code, err) = salience(&["run", "--config", bad.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(code, 2, "{err}");
}

#[test]
fn corrupt_corpus_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(&corpus, "{\"kind\":\"comment\"}\n").unwrap();
    let (code, err) = salience(&["fetch", "--corpus", corpus.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(code, 5, "{err}");
}

#[test]
fn recorded_api_config_runs_offline() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = salience(&["run", "--config", "fixtures/run_api_fixture.json"], dir.path());
    assert_eq!(code, 0, "{err}");
    let m = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.counts["raw_comments"], 210);
    assert_eq!(m.counts["labeled"] + m.counts["excluded"], m.counts["deduped"]);
}
