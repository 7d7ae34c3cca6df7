//! Density clustering with HDBSCAN on two Gaussian blobs plus a few far
//! outliers, compared with the generating labels.
//!
//! ```bash
//! cargo run --example cluster
//! ```

use std::error::Error;

use salience::cluster::{adjusted_rand_index, cluster, ClustererConfig, NOISE};
use salience::synthetic::two_blobs;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (mut points, truth) = two_blobs(100, 2, 10.0, 3);
    points.extend([vec![40.0, 40.0], vec![-40.0, 35.0], vec![5.0, -45.0]]);
    let ids: Vec<String> = (0..points.len()).map(|i| format!("p{i}")).collect();

    let cfg = ClustererConfig::default();
    let assignment = cluster(&ids, &points, &cfg)?;
    println!(
        "min_cluster_size {}: {} clusters, sizes {:?}, {} noise",
        cfg.min_cluster_size,
        assignment.cluster_count,
        assignment.sizes(),
        assignment.noise_count()
    );
    for i in 200..points.len() {
        println!("  outlier {:?} -> {}", points[i], assignment.labels[i]);
    }

    let (pred, gold): (Vec<i64>, Vec<i64>) = assignment.labels[..200]
        .iter()
        .zip(&truth)
        .filter(|(&l, _)| l != NOISE)
        .map(|(&l, &t)| (l, t as i64))
        .unzip();
    println!("ARI against the generating blobs (non-noise points): {:.4}", adjusted_rand_index(&pred, &gold));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
