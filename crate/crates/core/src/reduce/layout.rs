use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::FuzzyGraph;
use super::{ReduceError, ReducerConfig};

const CURVE_SAMPLES: usize = 300;
const CURVE_STEP_TOL: f64 = 1e-8;
const CURVE_MAX_ITER: usize = 500;

/// Low-dimensional similarity `1 / (1 + a * d^(2b))`.
pub fn phi(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

/// Target membership curve the `(a, b)` fit approximates.
pub fn curve_target(d: f64, min_dist: f64, spread: f64) -> f64 {
    if d <= min_dist {
        1.0
    } else {
        (-(d - min_dist) / spread).exp()
    }
}

/// Sample grid shared by the fit and its residual report.
pub fn curve_grid(spread: f64) -> Vec<f64> {
    let hi = 3.0 * spread;
    (0..CURVE_SAMPLES)
        .map(|i| hi * i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect()
}

fn curve_sse(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (phi(x, a, b) - y).powi(2))
        .sum()
}

/// Root-mean-square deviation of the fitted curve from its target.
pub fn curve_rmse(min_dist: f64, spread: f64, a: f64, b: f64) -> f64 {
    let xs = curve_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| curve_target(x, min_dist, spread)).collect();
    (curve_sse(&xs, &ys, a, b) / xs.len() as f64).sqrt()
}

/// Levenberg-Marquardt least-squares fit of `(a, b)` starting from `(1, 1)`.
pub fn fit_curve(min_dist: f64, spread: f64) -> Result<(f64, f64), ReduceError> {
    if !(spread > 0.0 && min_dist >= 0.0 && min_dist < spread) {
        return Err(ReduceError::InvalidConfig(format!(
            "need 0 <= min_dist < spread, got min_dist={min_dist}, spread={spread}"
        )));
    }
    let xs = curve_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| curve_target(x, min_dist, spread)).collect();
    let (mut a, mut b) = (1.0_f64, 1.0_f64);
    let mut sse = curve_sse(&xs, &ys, a, b);
    let mut lambda = 1e-3;
    for _ in 0..CURVE_MAX_ITER {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x == 0.0 {
                continue;
            }
            let u = x.powf(2.0 * b);
            let denom = (1.0 + a * u).powi(2);
            let ja = -u / denom;
            let jb = -a * u * 2.0 * x.ln() / denom;
            let r = 1.0 / (1.0 + a * u) - y;
            jtj[0][0] += ja * ja;
            jtj[0][1] += ja * jb;
            jtj[1][1] += jb * jb;
            jtr[0] += ja * r;
            jtr[1] += jb * r;
        }
        jtj[1][0] = jtj[0][1];
        let m00 = jtj[0][0] * (1.0 + lambda);
        let m11 = jtj[1][1] * (1.0 + lambda);
        let det = m00 * m11 - jtj[0][1] * jtj[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let da = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let db = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let step = (da * da + db * db).sqrt();
        let (na, nb) = (a + da, b + db);
        let trial = if na > 0.0 && nb > 0.0 {
            curve_sse(&xs, &ys, na, nb)
        } else {
            f64::INFINITY
        };
        if trial <= sse {
            a = na;
            b = nb;
            sse = trial;
            lambda = (lambda / 10.0).max(1e-12);
        } else {
            lambda *= 10.0;
        }
        if step < CURVE_STEP_TOL {
            return Ok((a, b));
        }
    }
    Err(ReduceError::NonConvergence {
        residual: (sse / xs.len() as f64).sqrt(),
    })
}

fn squared_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gradient of `ln phi(|yi - yj|)` with respect to `yi`.
pub fn attractive_grad(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let d2 = squared_dist(yi, yj);
    if d2 <= 0.0 {
        return vec![0.0; yi.len()];
    }
    let coef = -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b));
    yi.iter().zip(yj).map(|(x, y)| coef * (x - y)).collect()
}

/// Squared distance below which the repulsive coefficient is held constant.
pub const REPULSION_FLOOR: f64 = 1e-3;

/// Gradient of `ln(1 - phi(|yi - yj|))` with respect to `yi`, exact for
/// squared distances above [`REPULSION_FLOOR`].
pub fn repulsive_grad(yi: &[f64], yj: &[f64], a: f64, b: f64) -> Vec<f64> {
    let d2 = squared_dist(yi, yj).max(REPULSION_FLOOR);
    let coef = 2.0 * b / (d2 * (1.0 + a * d2.powf(b)));
    yi.iter().zip(yj).map(|(x, y)| coef * (x - y)).collect()
}

fn clip(x: f64) -> f64 {
    x.clamp(-4.0, 4.0)
}

/// Largest graph size solved with a dense eigendecomposition.
pub const DENSE_EIGEN_LIMIT: usize = 1000;

fn normalized_adjacency(graph: &FuzzyGraph) -> Option<Vec<f64>> {
    let deg = graph.degrees();
    if deg.iter().any(|&d| d <= 0.0) {
        return None;
    }
    Some(deg.iter().map(|d| 1.0 / d.sqrt()).collect())
}

/// Leading non-trivial eigenvectors of `D^-1/2 W D^-1/2`, signs fixed so the
/// largest-magnitude entry of each is positive, scaled into `[-10, 10]`.
pub fn spectral_init(graph: &FuzzyGraph, dim: usize, seed: u64) -> Option<Vec<Vec<f64>>> {
    let n = graph.n;
    if n <= dim + 1 {
        return None;
    }
    let inv_sqrt = normalized_adjacency(graph)?;
    let vectors = if n <= DENSE_EIGEN_LIMIT {
        dense_eigenvectors(graph, &inv_sqrt, dim)
    } else {
        subspace_eigenvectors(graph, &inv_sqrt, dim, seed)
    }?;
    let mut coords = vec![vec![0.0; dim]; n];
    for (c, v) in vectors.iter().enumerate() {
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][c] = sign * v[i];
        }
    }
    let max_abs = coords.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(max_abs > 0.0 && max_abs.is_finite()) {
        return None;
    }
    let scale = 10.0 / max_abs;
    coords.iter_mut().flatten().for_each(|x| *x *= scale);
    Some(coords)
}

fn dense_eigenvectors(graph: &FuzzyGraph, inv_sqrt: &[f64], dim: usize) -> Option<Vec<Vec<f64>>> {
    let n = graph.n;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(i, j, w) in &graph.edges {
        let v = w * inv_sqrt[i] * inv_sqrt[j];
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    Some(
        order[1..=dim]
            .iter()
            .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
            .collect(),
    )
}

fn subspace_eigenvectors(
    graph: &FuzzyGraph,
    inv_sqrt: &[f64],
    dim: usize,
    seed: u64,
) -> Option<Vec<Vec<f64>>> {
    let n = graph.n;
    let block = dim + 1;
    let adj = graph.adjacency();
    // (M + I) / 2 has the same eigenvectors as M and a non-negative spectrum.
    let apply = |q: &DMatrix<f64>| {
        let mut out = q * 0.5;
        for i in 0..n {
            for &(j, w) in &adj[i] {
                let v = 0.5 * w * inv_sqrt[i] * inv_sqrt[j];
                for c in 0..block {
                    out[(i, c)] += v * q[(j, c)];
                }
            }
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DMatrix::<f64>::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
    for _ in 0..300 {
        q = apply(&q).qr().q();
    }
    let z = apply(&q);
    let small = q.transpose() * z;
    let eig = SymmetricEigen::try_new(small, f64::EPSILON, 10_000)?;
    let mut order: Vec<usize> = (0..block).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let ritz = &q * &eig.eigenvectors;
    Some(
        order[1..=dim]
            .iter()
            .map(|&c| ritz.column(c).iter().copied().collect())
            .collect(),
    )
}

/// Seeded uniform coordinates in `[-10, 10]`.
pub fn random_init(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect()
}

/// Spectral layout plus a tiny seeded jitter, or uniform if the solve fails.
pub fn initial_layout(graph: &FuzzyGraph, dim: usize, seed: u64) -> (Vec<Vec<f64>>, bool) {
    match spectral_init(graph, dim, seed) {
        Some(mut coords) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let noise = Normal::new(0.0, 1e-4).expect("valid normal");
            coords.iter_mut().flatten().for_each(|x| *x += noise.sample(&mut rng));
            (coords, true)
        }
        None => (random_init(graph.n, dim, seed), false),
    }
}

/// Stochastic gradient optimization of the layout in place.
pub fn optimize_layout(
    graph: &FuzzyGraph,
    coords: &mut [Vec<f64>],
    cfg: &ReducerConfig,
    a: f64,
    b: f64,
) -> Result<(), ReduceError> {
    let n_epochs = cfg.epochs_for(graph.n);
    let w_max = graph.edges.iter().map(|e| e.2).fold(0.0_f64, f64::max);
    if graph.edges.is_empty() || n_epochs == 0 {
        return Ok(());
    }
    let neighbor_sets: Vec<HashSet<usize>> = graph
        .adjacency()
        .into_iter()
        .map(|row| row.into_iter().map(|(j, _)| j).collect())
        .collect();

    let mut heads = Vec::new();
    let mut tails = Vec::new();
    let mut eps = Vec::new();
    for &(i, j, w) in &graph.edges {
        if w < w_max / n_epochs as f64 {
            continue;
        }
        for (h, t) in [(i, j), (j, i)] {
            heads.push(h);
            tails.push(t);
            eps.push(w_max / w);
        }
    }
    let neg_rate = cfg.negative_sample_rate as f64;
    let eps_neg: Vec<f64> = eps.iter().map(|e| e / neg_rate).collect();
    let mut next_sample = eps.clone();
    let mut next_negative = eps_neg.clone();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);
    let n = graph.n;
    let dim = coords.first().map_or(0, Vec::len);
    let mut grad = vec![0.0; dim];

    for epoch in 0..n_epochs {
        let alpha = cfg.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
        let t = epoch as f64;
        for e in 0..heads.len() {
            if next_sample[e] > t {
                continue;
            }
            let (i, j) = (heads[e], tails[e]);
            let d2 = squared_dist(&coords[i], &coords[j]);
            if d2 > 0.0 {
                let coef = -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b));
                for d in 0..dim {
                    grad[d] = clip(coef * (coords[i][d] - coords[j][d]));
                }
                for d in 0..dim {
                    coords[i][d] += grad[d] * alpha;
                    coords[j][d] -= grad[d] * alpha;
                }
            }
            next_sample[e] += eps[e];

            let n_neg = ((t - next_negative[e]) / eps_neg[e]).max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.gen_range(0..n);
                if k == i || neighbor_sets[i].contains(&k) {
                    continue;
                }
                let d2 = squared_dist(&coords[i], &coords[k]);
                if d2 > 0.0 {
                    let d2f = d2.max(REPULSION_FLOOR);
                    let coef = 2.0 * b / (d2f * (1.0 + a * d2f.powf(b)));
                    for d in 0..dim {
                        coords[i][d] += clip(coef * (coords[i][d] - coords[k][d])) * alpha;
                    }
                } else {
                    for d in 0..dim {
                        coords[i][d] += 4.0 * alpha;
                    }
                }
            }
            next_negative[e] += n_neg as f64 * eps_neg[e];
        }
        if coords.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ReduceError::Numerical { epoch });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_at_zero_is_one() {
        for (a, b) in [(1.577, 0.895), (0.3, 2.0), (10.0, 0.1)] {
            assert_eq!(phi(0.0, a, b), 1.0);
        }
    }

    #[test]
    fn fit_rejects_bad_parameters() {
        assert!(fit_curve(1.0, 1.0).is_err());
        assert!(fit_curve(-0.1, 1.0).is_err());
    }

    #[test]
    fn exponential_target_fit_is_close() {
        let (a, b) = fit_curve(0.0, 1.0).unwrap();
        assert!(curve_rmse(0.0, 1.0, a, b) < 5e-2);
    }

    #[test]
    fn random_init_in_box() {
        let c = random_init(20, 3, 9);
        assert!(c.iter().flatten().all(|x| (-10.0..10.0).contains(x)));
        assert_eq!(c, random_init(20, 3, 9));
    }
}
