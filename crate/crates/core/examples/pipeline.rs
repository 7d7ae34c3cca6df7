//! Run every stage on the bundled 500-comment corpus and print the audit
//! counts and chi-square results. Pass a directory to keep the outputs.
//!
//! ```bash
//! cargo run --release --example pipeline -- out/fixture
//! ```

use std::error::Error;
use std::path::{Path, PathBuf};

use salience::pipeline::{run_pipeline, RunConfig, STATS_FILE};

pub fn run_example_in(outdir: &Path) -> Result<(), Box<dyn Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::load(&fixtures.join("run_fixture.json"))?;
    let manifest = run_pipeline(config, outdir)?;

    println!("status {}", manifest.status);
    for (k, v) in &manifest.counts {
        println!("  {k:<26} {v}");
    }
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(outdir.join(STATS_FILE))?)?;
    for method in ["keyword", "cluster"] {
        println!(
            "{method}: chi2 = {}, df = {}, p = {}",
            stats[method]["chi2"], stats[method]["df"], stats[method]["p_value"]
        );
    }
    println!("keyword rank {}", stats["comparison"]["keyword_rank"]);
    println!("cluster rank {}", stats["comparison"]["cluster_rank"]);
    println!("outputs in {}", outdir.display());
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tmp = tempfile::tempdir()?;
    run_example_in(tmp.path())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    match std::env::args().nth(1) {
        Some(dir) => run_example_in(Path::new(&dir)),
        None => run_example(),
    }
}
