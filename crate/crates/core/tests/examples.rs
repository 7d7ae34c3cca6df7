//! Every cargo example runs to completion.

#[path = "../examples/ingest.rs"]
mod ingest_example;

#[path = "../examples/keywords.rs"]
mod keywords_example;

#[path = "../examples/embed.rs"]
mod embed_example;

#[path = "../examples/reduce.rs"]
mod reduce_example;

#[path = "../examples/cluster.rs"]
mod cluster_example;

#[path = "../examples/chi_square.rs"]
mod chi_square_example;

#[path = "../examples/label.rs"]
mod label_example;

#[path = "../examples/pipeline.rs"]
mod pipeline_example;

#[test]
fn ingest_runs() {
    ingest_example::run_example().unwrap();
}

#[test]
fn keywords_runs() {
    keywords_example::run_example().unwrap();
}

#[test]
fn embed_runs() {
    embed_example::run_example().unwrap();
}

#[test]
fn reduce_runs() {
    reduce_example::run_example().unwrap();
}

#[test]
fn cluster_runs() {
    cluster_example::run_example().unwrap();
}

#[test]
fn chi_square_runs() {
    chi_square_example::run_example().unwrap();
}

#[test]
fn label_runs() {
    label_example::run_example().unwrap();
}

#[test]
fn pipeline_runs() {
    pipeline_example::run_example().unwrap();
}
