use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::reduce::euclidean;

/// Document frequencies over a corpus where each comment is one document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TfidfModel {
    pub n_docs: usize,
    pub df: BTreeMap<String, usize>,
}

impl TfidfModel {
    pub fn fit<D: AsRef<[String]>>(docs: &[D]) -> Self {
        let mut df = BTreeMap::new();
        for doc in docs {
            let unique: BTreeSet<&String> = doc.as_ref().iter().collect();
            for term in unique {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
        }
        TfidfModel {
            n_docs: docs.len(),
            df,
        }
    }

    /// Smoothed `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((1.0 + self.n_docs as f64) / (1.0 + df)).ln() + 1.0
    }

    /// Raw term counts summed over `members`, weighted by idf, best `k` by
    /// `(score desc, term asc)`.
    pub fn top_terms<D: AsRef<[String]>>(&self, members: &[D], k: usize) -> Vec<TermScore> {
        let mut tf: BTreeMap<&str, u64> = BTreeMap::new();
        for doc in members {
            for t in doc.as_ref() {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut scored: Vec<TermScore> = tf
            .into_iter()
            .map(|(term, n)| TermScore {
                term: term.to_string(),
                score: n as f64 * self.idf(term),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
        scored.truncate(k);
        scored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScore {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub size: usize,
    pub top_terms: Vec<TermScore>,
    pub sample_comments: Vec<String>,
}

/// Member with the smallest summed distance to the other members; ties by row.
pub fn medoid(points: &[Vec<f64>], members: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &i in members {
        let total: f64 = members.iter().map(|&j| euclidean(&points[i], &points[j])).sum();
        if total < best.0 || (total == best.0 && i < best.1) {
            best = (total, i);
        }
    }
    best.1
}

/// One summary per cluster of `assignment`.
///
/// `docs[i]`, `texts[i]` and `points[i]` describe assignment row `i`; idf is
/// fitted on every row, noise included.
pub fn summarize_clusters(
    assignment: &ClusterAssignment,
    docs: &[Vec<String>],
    texts: &[String],
    points: &[Vec<f64>],
    k: usize,
    n_samples: usize,
) -> Vec<ClusterSummary> {
    let model = TfidfModel::fit(docs);
    assignment
        .members()
        .into_iter()
        .enumerate()
        .map(|(cluster_id, members)| {
            let member_docs: Vec<&[String]> = members.iter().map(|&i| docs[i].as_slice()).collect();
            let center = medoid(points, &members);
            let mut by_distance: Vec<(f64, usize)> = members
                .iter()
                .map(|&i| (euclidean(&points[i], &points[center]), i))
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            ClusterSummary {
                cluster_id,
                size: members.len(),
                top_terms: model.top_terms(&member_docs, k),
                sample_comments: by_distance
                    .iter()
                    .take(n_samples)
                    .map(|&(_, i)| texts[i].clone())
                    .collect(),
            }
        })
        .collect()
}
