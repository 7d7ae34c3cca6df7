mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use salience::cluster::{
    adjusted_rand_index, cluster, condense, core_distances, extract_clusters, hdbscan, mutual_reachability_mst,
    single_linkage, ClustererConfig, NOISE,
};
use salience::synthetic::{gaussian_blobs, permutation, two_blobs};

use common::{kahan_sum, kruskal_mst_weight, oracle_ari, oracle_core_distances, same_partition};

fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect()
}

#[test]
fn core_distances_match_sorted_oracle() {
    for (seed, ms) in [(1, 1), (2, 3), (3, 5), (4, 10)] {
        let pts = random_points(60, 3, seed);
        assert_eq!(core_distances(&pts, ms).unwrap(), oracle_core_distances(&pts, ms));
    }
}

#[test]
fn prim_mst_weight_equals_kruskal() {
    for seed in 0..8 {
        let pts = random_points(80, 2 + seed as usize % 3, seed);
        let cores = core_distances(&pts, 4).unwrap();
        let mst = mutual_reachability_mst(&pts, &cores);
        assert_eq!(mst.len(), pts.len() - 1);
        let prim = kahan_sum(mst.iter().map(|e| e.weight));
        let kruskal = kruskal_mst_weight(&pts, &cores);
        assert!((prim - kruskal).abs() <= 1e-9 * kruskal, "seed {seed}: {prim} vs {kruskal}");
    }
}

#[test]
fn line_fixture_has_one_bridge_and_two_clusters() {
    let pts: Vec<Vec<f64>> = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2].iter().map(|&x| vec![x]).collect();
    let cores = core_distances(&pts, 1).unwrap();
    let mst = mutual_reachability_mst(&pts, &cores);
    assert_eq!(mst.iter().filter(|e| e.weight >= 9.8).count(), 1);
    let tree = condense(pts.len(), &single_linkage(pts.len(), &mst), 3);
    assert_eq!(tree.cluster_children(tree.root()).len(), 2);
    let labels = extract_clusters(&tree, &ClustererConfig::new(3, 1));
    assert!(same_partition(&labels, &[0, 0, 0, 1, 1, 1]));

    let mut with_outlier = pts.clone();
    with_outlier.push(vec![1000.0]);
    let labels = hdbscan(&with_outlier, &ClustererConfig::new(3, 1)).unwrap();
    assert_eq!(labels[6], NOISE);
    assert!(same_partition(&labels[..6], &[0, 0, 0, 1, 1, 1]));
}

#[test]
fn blobs_recovered_and_invariant() {
    let (pts, truth) = two_blobs(100, 2, 10.0, 9);
    let truth: Vec<i64> = truth.into_iter().map(|t| t as i64).collect();
    let cfg = ClustererConfig::default();
    let labels = hdbscan(&pts, &cfg).unwrap();
    let kept: Vec<usize> = (0..pts.len()).filter(|&i| labels[i] != NOISE).collect();
    let a: Vec<i64> = kept.iter().map(|&i| labels[i]).collect();
    let b: Vec<i64> = kept.iter().map(|&i| truth[i]).collect();
    assert_eq!(adjusted_rand_index(&a, &b), 1.0);
    assert_eq!(oracle_ari(&a, &b), 1.0);
    for s in 0..10 {
        let perm = permutation(pts.len(), s);
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&p| pts[p].clone()).collect();
        let got = hdbscan(&shuffled, &cfg).unwrap();
        let mut back = vec![0; pts.len()];
        for (k, &p) in perm.iter().enumerate() {
            back[p] = got[k];
        }
        assert!(same_partition(&back, &labels), "shuffle {s}");
    }
    let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * 7.0).collect()).collect();
    assert!(same_partition(&hdbscan(&scaled, &cfg).unwrap(), &labels));
}

#[test]
fn clusters_respect_min_size_and_single_blob_never_splits() {
    let (pts, _) = gaussian_blobs(&[vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]], 40, 1.0, 3);
    let cfg = ClustererConfig::new(10, 5);
    let ids: Vec<String> = (0..pts.len()).map(|i| i.to_string()).collect();
    let a = cluster(&ids, &pts, &cfg).unwrap();
    for size in a.sizes() {
        assert!(size >= cfg.min_cluster_size);
    }
    assert!(a.labels.iter().all(|&l| l == NOISE || (0..a.cluster_count as i64).contains(&l)));

    let (one, _) = gaussian_blobs(&[vec![0.0, 0.0]], 80, 1.0, 4);
    let labels = hdbscan(&one, &ClustererConfig::default()).unwrap();
    let distinct: std::collections::BTreeSet<i64> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    assert!(distinct.len() <= 1);
}

#[test]
fn fewer_points_than_min_cluster_size_is_all_noise() {
    let pts = random_points(9, 2, 5);
    assert!(hdbscan(&pts, &ClustererConfig::new(10, 3)).unwrap().iter().all(|&l| l == NOISE));
}

#[test]
fn ari_matches_contingency_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let a: Vec<i64> = (0..50).map(|_| rng.gen_range(-1..4)).collect();
        let b: Vec<i64> = (0..50).map(|_| rng.gen_range(0..3)).collect();
        assert!((adjusted_rand_index(&a, &b) - oracle_ari(&a, &b)).abs() < 1e-12);
    }
}
