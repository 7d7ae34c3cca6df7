//! HDBSCAN density clustering over mutual-reachability distances.
//!
//! Stages: [`core_distances`], [`mutual_reachability_mst`] (Prim),
//! [`condense`] (single-linkage dendrogram pruned by `min_cluster_size`)
//! and [`extract_clusters`] (excess of mass or leaf selection).

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reduce::euclidean;

pub const NOISE: i64 = -1;

/// Stand-in for `1 / 0` when points coincide.
pub const LAMBDA_MAX: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("need more than min_samples={min_samples} points, got {n}")]
    TooFewPoints { n: usize, min_samples: usize },
    #[error("invalid clusterer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    ExcessOfMass,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClustererConfig {
    pub min_cluster_size: usize,
    /// `None` means equal to `min_cluster_size`.
    pub min_samples: Option<usize>,
    pub selection: Selection,
}

impl Default for ClustererConfig {
    fn default() -> Self {
        ClustererConfig {
            min_cluster_size: 15,
            min_samples: None,
            selection: Selection::ExcessOfMass,
        }
    }
}

impl ClustererConfig {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Self {
        ClustererConfig {
            min_cluster_size,
            min_samples: Some(min_samples),
            selection: Selection::ExcessOfMass,
        }
    }

    pub fn effective_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 {
            return Err(ClusterError::InvalidConfig(format!(
                "min_cluster_size must be >= 2, got {}",
                self.min_cluster_size
            )));
        }
        if self.effective_min_samples() < 1 {
            return Err(ClusterError::InvalidConfig("min_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Result<Vec<f64>, ClusterError> {
    let n = points.len();
    if min_samples == 0 || n <= min_samples {
        return Err(ClusterError::TooFewPoints { n, min_samples });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(&points[i], &points[j]))
                .collect();
            let (_, kth, _) = d.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

fn edge_key(w: f64, u: usize, v: usize) -> (f64, usize, usize) {
    (w, u.min(v), u.max(v))
}

fn key_less(x: (f64, usize, usize), y: (f64, usize, usize)) -> bool {
    x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)).is_lt()
}

pub fn mutual_reachability(points: &[Vec<f64>], cores: &[f64], i: usize, j: usize) -> f64 {
    euclidean(&points[i], &points[j]).max(cores[i]).max(cores[j])
}

/// Prim's algorithm over the complete mutual-reachability graph, starting
/// at point 0. Equal weights are ordered by `(min index, max index)`.
/// Edges are returned with `a < b`, in the order they were added.
pub fn mutual_reachability_mst(points: &[Vec<f64>], cores: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best: Vec<(f64, usize, usize)> = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let cand = edge_key(mutual_reachability(points, cores, current, v), current, v);
            if key_less(cand, best[v]) {
                best[v] = cand;
                from[v] = current;
            }
            if next == usize::MAX || key_less(best[v], best[next]) {
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge {
            a: from[next].min(next),
            b: from[next].max(next),
            weight: best[next].0,
        });
        current = next;
    }
    edges
}

/// One merge of the single-linkage dendrogram; nodes `>= n` are merges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage dendrogram from MST edges sorted by `(weight, a, b)`.
pub fn single_linkage(n: usize, mst: &[MstEdge]) -> Vec<Merge> {
    let mut edges = mst.to_vec();
    edges.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (step, e) in edges.iter().enumerate() {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        let node = n + step;
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push(Merge {
            left: ra,
            right: rb,
            distance: e.weight,
            size: size[node],
        });
    }
    merges
}

/// A condensed-tree row: `child` (a point `< n` or a cluster `>= n`) leaves
/// `parent` at density `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedNode {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub child_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedTree {
    pub n_points: usize,
    pub nodes: Vec<CondensedNode>,
}

impl CondensedTree {
    pub fn root(&self) -> usize {
        self.n_points
    }

    /// Cluster ids, root first, in creation order.
    pub fn clusters(&self) -> Vec<usize> {
        let mut out = vec![self.root()];
        out.extend(self.nodes.iter().filter(|r| r.child >= self.n_points).map(|r| r.child));
        out
    }

    pub fn cluster_children(&self, cluster: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|r| r.parent == cluster && r.child >= self.n_points)
            .map(|r| r.child)
            .collect()
    }

    /// Lambda at which `cluster` split off its parent; 0 for the root.
    pub fn birth_lambda(&self, cluster: usize) -> f64 {
        self.nodes
            .iter()
            .find(|r| r.child == cluster)
            .map_or(0.0, |r| r.lambda)
    }

    /// `sum over rows under cluster of (lambda - lambda_birth) * child_size`.
    pub fn stabilities(&self) -> BTreeMap<usize, f64> {
        let births: BTreeMap<usize, f64> = self
            .clusters()
            .into_iter()
            .map(|c| (c, self.birth_lambda(c)))
            .collect();
        let mut stab: BTreeMap<usize, f64> = births.keys().map(|&c| (c, 0.0)).collect();
        for r in &self.nodes {
            *stab.get_mut(&r.parent).expect("parent is a cluster") +=
                (r.lambda - births[&r.parent]) * r.child_size as f64;
        }
        stab
    }
}

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        (1.0 / distance).min(LAMBDA_MAX)
    } else {
        LAMBDA_MAX
    }
}

/// Walks the dendrogram top-down; a side smaller than `min_cluster_size`
/// falls out of its parent point by point instead of forming a cluster.
pub fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let mut nodes = Vec::new();
    if n == 0 {
        return CondensedTree { n_points: 0, nodes };
    }
    if n == 1 {
        nodes.push(CondensedNode {
            parent: 1,
            child: 0,
            lambda: LAMBDA_MAX,
            child_size: 1,
        });
        return CondensedTree { n_points: 1, nodes };
    }
    let root = 2 * n - 2;
    let children = |node: usize| -> (usize, usize, f64) {
        let m = &merges[node - n];
        (m.left, m.right, m.distance)
    };
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };
    let leaves_under = |node: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let (l, r, _) = children(x);
                stack.push(r);
                stack.push(l);
            }
        }
        out.sort_unstable();
        out
    };

    let mut relabel = vec![0usize; 2 * n - 1];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut queue = VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let (left, right, distance) = children(node);
        let lambda = lambda_of(distance);
        let (ls, rs) = (size_of(left), size_of(right));
        let parent = relabel[node];
        let fall_out = |side: usize, nodes: &mut Vec<CondensedNode>| {
            for p in leaves_under(side) {
                nodes.push(CondensedNode {
                    parent,
                    child: p,
                    lambda,
                    child_size: 1,
                });
            }
        };
        match (ls >= min_cluster_size, rs >= min_cluster_size) {
            (true, true) => {
                for (side, size) in [(left, ls), (right, rs)] {
                    relabel[side] = next_label;
                    nodes.push(CondensedNode {
                        parent,
                        child: next_label,
                        lambda,
                        child_size: size,
                    });
                    next_label += 1;
                    queue.push_back(side);
                }
            }
            (false, false) => {
                fall_out(left, &mut nodes);
                fall_out(right, &mut nodes);
            }
            (true, false) => {
                fall_out(right, &mut nodes);
                relabel[left] = parent;
                queue.push_back(left);
            }
            (false, true) => {
                fall_out(left, &mut nodes);
                relabel[right] = parent;
                queue.push_back(right);
            }
        }
    }
    CondensedTree { n_points: n, nodes }
}

/// Clusters chosen from the condensed tree, in label order.
pub fn select_clusters(tree: &CondensedTree, selection: Selection) -> Vec<usize> {
    let root = tree.root();
    let mut stability = tree.stabilities();
    let clusters: Vec<usize> = tree.clusters().into_iter().filter(|&c| c != root).collect();
    let mut selected: BTreeMap<usize, bool> = clusters.iter().map(|&c| (c, true)).collect();

    let descendants = |c: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = tree.cluster_children(c);
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(tree.cluster_children(x));
        }
        out
    };

    match selection {
        Selection::ExcessOfMass => {
            // Children always carry larger ids than their parent.
            for &c in clusters.iter().rev() {
                let kids = tree.cluster_children(c);
                let subtree: f64 = kids.iter().map(|k| stability[k]).sum();
                if !kids.is_empty() && subtree >= stability[&c] {
                    selected.insert(c, false);
                    stability.insert(c, subtree);
                } else {
                    for d in descendants(c) {
                        selected.insert(d, false);
                    }
                }
            }
        }
        Selection::Leaf => {
            for &c in &clusters {
                if !tree.cluster_children(c).is_empty() {
                    selected.insert(c, false);
                }
            }
        }
    }
    let mut chosen: Vec<usize> = selected.into_iter().filter(|&(_, s)| s).map(|(c, _)| c).collect();
    chosen.sort_by(|&x, &y| {
        tree.birth_lambda(x)
            .total_cmp(&tree.birth_lambda(y))
            .then(x.cmp(&y))
    });
    chosen
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub ids: Vec<String>,
    pub labels: Vec<i64>,
    pub cluster_count: usize,
    pub config: ClustererConfig,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Member row indices of each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

/// Flat labels for the selected clusters; unselected points are [`NOISE`].
pub fn extract_clusters(tree: &CondensedTree, cfg: &ClustererConfig) -> Vec<i64> {
    let n = tree.n_points;
    let chosen = select_clusters(tree, cfg.selection);
    let label_of: BTreeMap<usize, i64> = chosen.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
    let mut cluster_parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_parent = vec![tree.root(); n];
    for r in &tree.nodes {
        if r.child >= n {
            cluster_parent.insert(r.child, r.parent);
        } else {
            point_parent[r.child] = r.parent;
        }
    }
    point_parent
        .iter()
        .map(|&start| {
            let mut c = start;
            loop {
                if let Some(&l) = label_of.get(&c) {
                    return l;
                }
                match cluster_parent.get(&c) {
                    Some(&p) => c = p,
                    None => return NOISE,
                }
            }
        })
        .collect()
}

/// Full HDBSCAN on raw rows. Fewer points than `min_cluster_size` is all noise;
/// `min_samples` is capped at `n - 1`.
pub fn hdbscan(points: &[Vec<f64>], cfg: &ClustererConfig) -> Result<Vec<i64>, ClusterError> {
    cfg.validate()?;
    let n = points.len();
    if n < cfg.min_cluster_size || n < 2 {
        return Ok(vec![NOISE; n]);
    }
    let min_samples = cfg.effective_min_samples().min(n - 1);
    let cores = core_distances(points, min_samples)?;
    let mst = mutual_reachability_mst(points, &cores);
    let merges = single_linkage(n, &mst);
    let tree = condense(n, &merges, cfg.min_cluster_size);
    Ok(extract_clusters(&tree, cfg))
}

pub fn cluster(ids: &[String], points: &[Vec<f64>], cfg: &ClustererConfig) -> Result<ClusterAssignment, ClusterError> {
    let labels = hdbscan(points, cfg)?;
    let cluster_count = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    Ok(ClusterAssignment {
        ids: ids.to_vec(),
        labels,
        cluster_count,
        config: cfg.clone(),
    })
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len() as u64;
    let mut table: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut rows: BTreeMap<i64, u64> = BTreeMap::new();
    let mut cols: BTreeMap<i64, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn core_distance_examples() {
        assert_eq!(core_distances(&line(&[0.0, 1.0, 3.0]), 1).unwrap(), vec![1.0, 1.0, 2.0]);
        assert_eq!(core_distances(&line(&[0.0, 1.0, 3.0]), 2).unwrap(), vec![3.0, 2.0, 3.0]);
        assert_eq!(core_distances(&line(&[5.0; 4]), 2).unwrap(), vec![0.0; 4]);
        assert!(core_distances(&line(&[0.0, 1.0]), 2).is_err());
    }

    #[test]
    fn two_point_mst() {
        let pts = line(&[0.0, 2.0]);
        let cores = core_distances(&pts, 1).unwrap();
        assert_eq!(
            mutual_reachability_mst(&pts, &cores),
            vec![MstEdge { a: 0, b: 1, weight: 2.0 }]
        );
    }

    #[test]
    fn tiny_two_blob_walkthrough() {
        let pts = line(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let cores = core_distances(&pts, 1).unwrap();
        let mst = mutual_reachability_mst(&pts, &cores);
        assert_eq!(mst.iter().filter(|e| e.weight >= 9.8).count(), 1);
        let tree = condense(6, &single_linkage(6, &mst), 3);
        assert_eq!(tree.cluster_children(tree.root()).len(), 2);
        for r in &tree.nodes {
            assert!(r.lambda > 0.0);
        }
        let labels = extract_clusters(&tree, &ClustererConfig::new(3, 1));
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn small_input_is_noise() {
        let cfg = ClustererConfig::new(5, 1);
        assert_eq!(hdbscan(&line(&[0.0, 1.0, 2.0]), &cfg).unwrap(), vec![NOISE; 3]);
        let tree = condense(3, &single_linkage(3, &mutual_reachability_mst(&line(&[0.0, 1.0, 2.0]), &[1.0; 3])), 5);
        assert!(tree.nodes.iter().all(|r| r.parent == tree.root() && r.child < 3));
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }
}
