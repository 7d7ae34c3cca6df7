use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{Metric, ReduceError};

/// Per-point neighbor lists, ascending by distance, ties by lower index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 && nb == 0.0 {
        return 0.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => cosine_distance(a, b),
        }
    }
}

/// `k` smallest `(distance, index)` pairs of row `i` against all other rows.
pub(crate) fn nearest(points: &[Vec<f64>], i: usize, k: usize, metric: Metric) -> Vec<(f64, usize)> {
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, p)| (metric.distance(&points[i], p), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand
}

/// Exact brute-force k-nearest neighbors.
pub fn knn_graph(points: &[Vec<f64>], k: usize, metric: Metric) -> Result<KnnGraph, ReduceError> {
    let n = points.len();
    if k == 0 || n <= k {
        return Err(ReduceError::TooFewPoints { n, k });
    }
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(points, i, k, metric))
        .collect();
    Ok(KnnGraph {
        k,
        indices: rows.iter().map(|r| r.iter().map(|&(_, j)| j).collect()).collect(),
        distances: rows.iter().map(|r| r.iter().map(|&(d, _)| d).collect()).collect(),
    })
}

const SMOOTH_K_TOLERANCE: f64 = 1e-5;
const SMOOTH_K_ITERATIONS: usize = 64;
const MIN_SIGMA: f64 = 1e-12;

/// Distance offset `rho` and bandwidth `sigma` for one point.
///
/// `sigma` solves `sum_j exp(-max(0, d_j - rho) / sigma) = log2(k)` by
/// bisection and is floored at `1e-3 * mean(d)`.
pub fn smooth_knn(dists: &[f64], k: usize) -> (f64, f64) {
    let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();
    let mean = if dists.is_empty() {
        0.0
    } else {
        dists.iter().sum::<f64>() / dists.len() as f64
    };
    let floor = (1e-3 * mean).max(MIN_SIGMA);

    let (mut lo, mut hi, mut mid) = (0.0_f64, f64::INFINITY, 1.0_f64);
    for _ in 0..SMOOTH_K_ITERATIONS {
        let psum: f64 = dists
            .iter()
            .map(|&d| (-(d - rho).max(0.0) / mid).exp())
            .sum();
        if (psum - target).abs() < SMOOTH_K_TOLERANCE {
            break;
        }
        if psum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_finite() { (lo + hi) / 2.0 } else { mid * 2.0 };
        }
    }
    (rho, mid.max(floor))
}

/// Symmetric fuzzy neighbor graph.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Undirected edges `(i, j, w)` with `i < j`, sorted by `(i, j)`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    /// Adjacency lists holding every edge in both directions.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for row in &mut adj {
            row.sort_by_key(|&(j, _)| j);
        }
        adj
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .map(|p| self.edges[p].2)
            .unwrap_or(0.0)
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for &(i, j, w) in &self.edges {
            deg[i] += w;
            deg[j] += w;
        }
        deg
    }
}

/// Directed membership strength of the `j`-th neighbor of a point.
pub fn directed_weight(d: f64, rho: f64, sigma: f64) -> f64 {
    (-(d - rho).max(0.0) / sigma).exp()
}

/// Probabilistic union `a + b - ab` of the directed kNN memberships.
pub fn fuzzy_union(knn: &KnnGraph, rho: &[f64], sigma: &[f64]) -> FuzzyGraph {
    let mut directed: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, (nbrs, dists)) in knn.indices.iter().zip(&knn.distances).enumerate() {
        for (&j, &d) in nbrs.iter().zip(dists) {
            let a = directed_weight(d, rho[i], sigma[i]);
            let entry = directed.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                entry.0 = a;
            } else {
                entry.1 = a;
            }
        }
    }
    let edges = directed
        .into_iter()
        .map(|((i, j), (a, b))| (i, j, a + b - a * b))
        .filter(|&(_, _, w)| w > 0.0)
        .collect();
    FuzzyGraph {
        n: knn.len(),
        rho: rho.to_vec(),
        sigma: sigma.to_vec(),
        edges,
    }
}

/// kNN, per-point calibration and union in one step.
pub fn fuzzy_graph(points: &[Vec<f64>], k: usize, metric: Metric) -> Result<FuzzyGraph, ReduceError> {
    let knn = knn_graph(points, k, metric)?;
    let (rho, sigma): (Vec<f64>, Vec<f64>) = knn.distances.iter().map(|d| smooth_knn(d, k)).unzip();
    Ok(fuzzy_union(&knn, &rho, &sigma))
}
