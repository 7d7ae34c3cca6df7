//! Reduce two well separated Gaussian blobs with the manifold layout and
//! score how well local neighborhoods survive.
//!
//! ```bash
//! cargo run --release --example reduce
//! ```

use std::error::Error;

use salience::reduce::{fit_curve, reduce_points, trustworthiness, Metric, ReducerConfig};
use salience::synthetic::two_blobs;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (a, b) = fit_curve(0.1, 1.0)?;
    println!("curve parameters for min_dist 0.1, spread 1.0: a = {a:.4}, b = {b:.4}");

    let (points, truth) = two_blobs(50, 3, 10.0, 11);
    let cfg = ReducerConfig {
        metric: Metric::Euclidean,
        seed: 5,
        ..ReducerConfig::default()
    };
    let layout = reduce_points(&points, &cfg)?;
    let t = trustworthiness(&points, &layout, 10, Metric::Euclidean);
    println!("{} points in 3-D -> 2-D, trustworthiness(k=10) = {t:.4}", points.len());

    for blob in 0..2 {
        let xs: Vec<&Vec<f64>> = layout.iter().zip(&truth).filter(|(_, &l)| l == blob).map(|(p, _)| p).collect();
        let cx = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
        let cy = xs.iter().map(|p| p[1]).sum::<f64>() / xs.len() as f64;
        println!("  blob {blob} centroid ({cx:.3}, {cy:.3})");
    }
    assert_eq!(layout, reduce_points(&points, &cfg)?, "same seed, same layout");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
