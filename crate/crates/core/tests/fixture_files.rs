//! Bundled fixture files are exactly what the generators produce.
//! Set `SALIENCE_BLESS=1` to rewrite them.

use std::fs;
use std::path::PathBuf;

use salience::corpus::{load_corpus, store_corpus};
use salience::synthetic::{fixture_corpus, write_api_fixture, API_FIXTURE_SEED, FIXTURE_COUNTS, FIXTURE_SEED};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn synthetic_corpus_file_matches_generator() {
    let path = fixtures().join("synthetic_500.jsonl");
    let generated = fixture_corpus(FIXTURE_SEED);
    if std::env::var_os("SALIENCE_BLESS").is_some() {
        store_corpus(&generated, &path).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("c.jsonl");
    store_corpus(&generated, &fresh).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&fresh).unwrap());
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded, generated);
    assert_eq!(loaded.comments.len(), FIXTURE_COUNTS.raw);
    assert_eq!(loaded.videos.len(), FIXTURE_COUNTS.videos);
}

fn listing(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn recorded_api_fixture_matches_generator() {
    let shipped = fixtures().join("youtube_api");
    if std::env::var_os("SALIENCE_BLESS").is_some() {
        let _ = fs::remove_dir_all(&shipped);
        write_api_fixture(&shipped, API_FIXTURE_SEED).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    write_api_fixture(dir.path(), API_FIXTURE_SEED).unwrap();
    assert_eq!(listing(&shipped), listing(dir.path()));
}
