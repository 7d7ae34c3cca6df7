//! UMAP-style nonlinear dimensionality reduction.
//!
//! Stages: exact kNN ([`knn_graph`]), per-point calibration ([`smooth_knn`]),
//! symmetrization ([`fuzzy_union`]), the low-dimensional curve fit
//! ([`fit_curve`]), spectral initialization and SGD ([`optimize_layout`]).
//! Everything is sequential where order matters, so a fixed seed gives
//! bitwise-identical coordinates.

mod graph;
mod layout;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingMatrix;

pub use graph::{
    cosine_distance, directed_weight, euclidean, fuzzy_graph, fuzzy_union, knn_graph, smooth_knn,
    FuzzyGraph, KnnGraph,
};
pub use layout::{
    attractive_grad, curve_grid, curve_rmse, curve_target, fit_curve, initial_layout,
    optimize_layout, phi, random_init, repulsive_grad, spectral_init, DENSE_EIGEN_LIMIT,
    REPULSION_FLOOR,
};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("need more than k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("invalid reducer config: {0}")]
    InvalidConfig(String),
    #[error("curve fit did not converge (rmse {residual:.3e})")]
    NonConvergence { residual: f64 },
    #[error("layout became non-finite at epoch {epoch}")]
    Numerical { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReducerConfig {
    pub n_neighbors: usize,
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// `None` picks 500 epochs up to 10k points and 200 above.
    pub n_epochs: Option<usize>,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for ReducerConfig {
    fn default() -> Self {
        ReducerConfig {
            n_neighbors: 15,
            n_components: 2,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: None,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            seed: 42,
            metric: Metric::Cosine,
        }
    }
}

impl ReducerConfig {
    pub fn with_components(mut self, n_components: usize) -> Self {
        self.n_components = n_components;
        self
    }

    pub fn epochs_for(&self, n_points: usize) -> usize {
        self.n_epochs
            .unwrap_or(if n_points <= 10_000 { 500 } else { 200 })
    }

    pub fn validate(&self, n_points: usize) -> Result<(), ReduceError> {
        if self.n_neighbors < 2 {
            return Err(ReduceError::InvalidConfig(format!(
                "n_neighbors must be >= 2, got {}",
                self.n_neighbors
            )));
        }
        if n_points <= self.n_neighbors {
            return Err(ReduceError::TooFewPoints {
                n: n_points,
                k: self.n_neighbors,
            });
        }
        if self.n_components == 0 {
            return Err(ReduceError::InvalidConfig("n_components must be >= 1".into()));
        }
        if !(self.min_dist >= 0.0 && self.min_dist < self.spread) {
            return Err(ReduceError::InvalidConfig(format!(
                "need 0 <= min_dist < spread, got {} and {}",
                self.min_dist, self.spread
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ReduceError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Reduced coordinates, row-aligned with the input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutEmbedding {
    pub ids: Vec<String>,
    pub coords: Vec<Vec<f64>>,
    pub config: ReducerConfig,
    /// False when the spectral solve failed and the uniform fallback was used.
    pub spectral_init: bool,
}

impl LayoutEmbedding {
    pub fn provider_name(&self) -> String {
        format!("reduce:{}d:{}", self.config.n_components, self.config.seed)
    }

    pub fn to_matrix(&self) -> EmbeddingMatrix {
        EmbeddingMatrix {
            ids: self.ids.clone(),
            rows: self.coords.clone(),
            provider_name: self.provider_name(),
            dim: self.config.n_components,
        }
    }
}

/// Runs the full reducer on raw rows.
pub fn reduce_points(points: &[Vec<f64>], cfg: &ReducerConfig) -> Result<Vec<Vec<f64>>, ReduceError> {
    Ok(reduce_with_init(points, cfg)?.0)
}

fn reduce_with_init(
    points: &[Vec<f64>],
    cfg: &ReducerConfig,
) -> Result<(Vec<Vec<f64>>, bool), ReduceError> {
    cfg.validate(points.len())?;
    let graph = fuzzy_graph(points, cfg.n_neighbors, cfg.metric)?;
    let (a, b) = fit_curve(cfg.min_dist, cfg.spread)?;
    let (mut coords, spectral) = initial_layout(&graph, cfg.n_components, cfg.seed);
    optimize_layout(&graph, &mut coords, cfg, a, b)?;
    Ok((coords, spectral))
}

pub fn reduce(matrix: &EmbeddingMatrix, cfg: &ReducerConfig) -> Result<LayoutEmbedding, ReduceError> {
    let (coords, spectral_init) = reduce_with_init(&matrix.rows, cfg)?;
    Ok(LayoutEmbedding {
        ids: matrix.ids.clone(),
        coords,
        config: cfg.clone(),
        spectral_init,
    })
}

/// Trustworthiness of a layout: 1 minus the rank-weighted penalty for
/// points that are layout neighbors but not input-space neighbors.
pub fn trustworthiness(high: &[Vec<f64>], low: &[Vec<f64>], k: usize, metric: Metric) -> f64 {
    let n = high.len();
    assert_eq!(n, low.len(), "row counts differ");
    assert!(2 * k < n, "trustworthiness needs k < n/2");
    let mut penalty = 0.0;
    for i in 0..n {
        let mut order: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (metric.distance(&high[i], &high[j]), j))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut rank = vec![0usize; n];
        for (r, &(_, j)) in order.iter().enumerate() {
            rank[j] = r + 1;
        }
        for (_, j) in graph::nearest(low, i, k, Metric::Euclidean) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_layout_is_fully_trustworthy() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i) as f64 * 0.01]).collect();
        assert_eq!(trustworthiness(&pts, &pts, 5, Metric::Euclidean), 1.0);
    }

    #[test]
    fn config_validation() {
        let cfg = ReducerConfig::default();
        assert!(matches!(cfg.validate(15), Err(ReduceError::TooFewPoints { .. })));
        assert!(cfg.validate(16).is_ok());
        let bad = ReducerConfig {
            min_dist: 1.0,
            ..ReducerConfig::default()
        };
        assert!(bad.validate(100).is_err());
        assert_eq!(cfg.epochs_for(10_000), 500);
        assert_eq!(cfg.epochs_for(10_001), 200);
    }

    #[test]
    fn provider_name_format() {
        let layout = LayoutEmbedding {
            ids: vec![],
            coords: vec![],
            config: ReducerConfig::default().with_components(5),
            spectral_init: true,
        };
        assert_eq!(layout.provider_name(), "reduce:5d:42");
    }
}
