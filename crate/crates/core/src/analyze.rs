//! Cluster-method salience tables, chi-square goodness of fit and rank
//! comparison of the two methods.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{day_index, Channel, Corpus, DayIndex};
use crate::keywords::{MethodTag, SalienceTable};
use crate::labeling::FilteredAssignment;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyzeError {
    #[error("degenerate chi-square input: {0}")]
    DegenerateInput(String),
    #[error("issue sets differ: {keyword:?} vs {cluster:?}")]
    IssueSetMismatch {
        keyword: Vec<String>,
        cluster: Vec<String>,
    },
}

/// Counts issue-labeled comments per (issue, day, channel); comments whose id
/// is not an in-window corpus comment are skipped.
pub fn salience_table_clusters(
    filtered: &FilteredAssignment,
    corpus: &Corpus,
    issues: Vec<String>,
) -> SalienceTable {
    let cells: HashMap<&str, (DayIndex, &Channel)> = corpus
        .analyzed_comments()
        .filter_map(|c| {
            day_index(&c.published_at, &corpus.window)
                .ok()
                .map(|d| (c.comment_id.as_str(), (d, &c.channel)))
        })
        .collect();
    let mut table = SalienceTable::new(MethodTag::ClusterMethod, issues);
    for l in &filtered.labeled {
        if let Some(&(day, channel)) = cells.get(l.comment_id.as_str()) {
            table.add(l.issue, day, channel, 1);
        }
    }
    table
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

fn prefactor(s: f64, x: f64) -> f64 {
    (-x + s * x.ln() - ln_gamma(s)).exp()
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..GAMMA_MAX_ITER {
        term *= x / (s + n as f64);
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * prefactor(s, x)
}

fn upper_continued_fraction(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    prefactor(s, x) * h
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn gamma_p(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "gamma_p needs s > 0 and x >= 0");
    if x == 0.0 {
        0.0
    } else if x < s + 1.0 {
        lower_series(s, x)
    } else {
        1.0 - upper_continued_fraction(s, x)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`.
pub fn gamma_q(s: f64, x: f64) -> f64 {
    assert!(s > 0.0 && x >= 0.0, "gamma_q needs s > 0 and x >= 0");
    if x == 0.0 {
        1.0
    } else if x < s + 1.0 {
        1.0 - lower_series(s, x)
    } else {
        upper_continued_fraction(s, x)
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    gamma_q(df as f64 / 2.0, statistic / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofStat {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
}

/// Pearson goodness of fit against `expected` (uniform when `None`).
pub fn chi_square_gof(counts: &[u64], expected: Option<&[f64]>) -> Result<GofStat, AnalyzeError> {
    let k = counts.len();
    if k < 2 {
        return Err(AnalyzeError::DegenerateInput(format!("need >= 2 categories, got {k}")));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(AnalyzeError::DegenerateInput("total count is zero".into()));
    }
    let expected: Vec<f64> = match expected {
        Some(e) if e.len() != k => {
            return Err(AnalyzeError::DegenerateInput(format!(
                "{} expected values for {k} categories",
                e.len()
            )))
        }
        Some(e) => e.to_vec(),
        None => vec![total as f64 / k as f64; k],
    };
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(AnalyzeError::DegenerateInput("an expected count is zero".into()));
    }
    let statistic: f64 = counts
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = k - 1;
    Ok(GofStat {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
        counts: counts.to_vec(),
        expected,
    })
}

/// Issue names by `(total desc, name asc)`.
pub fn rank_issues(issues: &[String], totals: &[u64]) -> Vec<String> {
    let mut order: Vec<usize> = (0..issues.len()).collect();
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then_with(|| issues[a].cmp(&issues[b])));
    order.into_iter().map(|i| issues[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub issues: Vec<String>,
    pub keyword_totals: Vec<u64>,
    pub cluster_totals: Vec<u64>,
    pub keyword_rank: Vec<String>,
    pub cluster_rank: Vec<String>,
    pub top3_overlap: usize,
    pub top_issue_agrees: bool,
}

pub fn top_k_overlap(a: &[String], b: &[String], k: usize) -> usize {
    let sa: BTreeSet<&String> = a.iter().take(k).collect();
    b.iter().take(k).filter(|x| sa.contains(x)).count()
}

pub fn compare_methods(kw: &SalienceTable, cl: &SalienceTable) -> Result<MethodComparison, AnalyzeError> {
    if kw.issues != cl.issues {
        return Err(AnalyzeError::IssueSetMismatch {
            keyword: kw.issues.clone(),
            cluster: cl.issues.clone(),
        });
    }
    let keyword_totals = kw.issue_totals();
    let cluster_totals = cl.issue_totals();
    let keyword_rank = rank_issues(&kw.issues, &keyword_totals);
    let cluster_rank = rank_issues(&cl.issues, &cluster_totals);
    Ok(MethodComparison {
        issues: kw.issues.clone(),
        top3_overlap: top_k_overlap(&keyword_rank, &cluster_rank, 3),
        top_issue_agrees: keyword_rank.first() == cluster_rank.first(),
        keyword_totals,
        cluster_totals,
        keyword_rank,
        cluster_rank,
    })
}

/// One method's block of `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    /// `None` when the table is empty.
    pub chi2: Option<f64>,
    pub df: usize,
    pub p_value: Option<f64>,
    pub counts: BTreeMap<String, u64>,
}

impl MethodStats {
    pub fn from_table(table: &SalienceTable) -> Self {
        let totals = table.issue_totals();
        let gof = chi_square_gof(&totals, None).ok();
        MethodStats {
            method: table.method.as_str().to_string(),
            chi2: gof.as_ref().map(|g| g.statistic),
            df: table.issues.len().saturating_sub(1),
            p_value: gof.as_ref().map(|g| g.p_value),
            counts: table.issues.iter().cloned().zip(totals).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub keyword: MethodStats,
    pub cluster: MethodStats,
    pub comparison: MethodComparison,
}

pub fn stats_report(kw: &SalienceTable, cl: &SalienceTable) -> Result<StatsReport, AnalyzeError> {
    Ok(StatsReport {
        keyword: MethodStats::from_table(kw),
        cluster: MethodStats::from_table(cl),
        comparison: compare_methods(kw, cl)?,
    })
}
