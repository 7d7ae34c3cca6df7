//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use salience::keywords::{IssueTaxonomy, KeywordRule};

// ---------------------------------------------------------------- keywords

/// A phrase occurrence: start token, length, rule index.
type Occurrence = (usize, usize, usize);

fn phrase_occurrences(tokens: &[String], rules: &[KeywordRule]) -> Vec<Occurrence> {
    let mut out = Vec::new();
    for (r, rule) in rules.iter().enumerate() {
        if let KeywordRule::Phrase { tokens: phrase, .. } = rule {
            for s in 0..tokens.len() {
                if s + phrase.len() <= tokens.len() && tokens[s..s + phrase.len()] == phrase[..] {
                    out.push((s, phrase.len(), r));
                }
            }
        }
    }
    out
}

fn overlaps(a: &Occurrence, b: &Occurrence) -> bool {
    a.0 < b.0 + b.1 && b.0 < a.0 + a.1
}

fn enumerate_sets(occ: &[Occurrence], i: usize, chosen: &mut Vec<Occurrence>, out: &mut Vec<Vec<Occurrence>>) {
    if i == occ.len() {
        let maximal = occ
            .iter()
            .all(|o| chosen.contains(o) || chosen.iter().any(|c| overlaps(c, o)));
        if maximal {
            let mut set = chosen.clone();
            set.sort();
            out.push(set);
        }
        return;
    }
    let blocked = chosen.iter().any(|c| overlaps(c, &occ[i]));
    let blockable_later = occ[i + 1..].iter().any(|o| overlaps(o, &occ[i]));
    if blocked || blockable_later {
        enumerate_sets(occ, i + 1, chosen, out);
    }
    if !chosen.iter().any(|c| overlaps(c, &occ[i])) {
        chosen.push(occ[i]);
        enumerate_sets(occ, i + 1, chosen, out);
        chosen.pop();
    }
}

/// Preference between two maximal sets: compare matches in start order;
/// an earlier start wins, then a longer match, then a lower rule index.
fn preferred(a: &[Occurrence], b: &[Occurrence]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.0.cmp(&y.0).then(y.1.cmp(&x.1)).then(x.2.cmp(&y.2));
        if o.is_ne() {
            return o;
        }
    }
    b.len().cmp(&a.len())
}

/// Exhaustive phrase matcher for one issue: enumerate every maximal set of
/// non-overlapping occurrences and keep the preferred one.
pub fn oracle_phrase_counts(tokens: &[String], rules: &[KeywordRule]) -> Vec<u64> {
    let mut occ = phrase_occurrences(tokens, rules);
    occ.sort();
    let mut sets = Vec::new();
    enumerate_sets(&occ, 0, &mut Vec::new(), &mut sets);
    let best = sets.into_iter().min_by(|a, b| preferred(a, b)).unwrap_or_default();
    let mut counts = vec![0; rules.len()];
    for (_, _, r) in best {
        counts[r] += 1;
    }
    counts
}

fn is_word_char(c: Option<char>) -> bool {
    c.is_some_and(char::is_alphanumeric)
}

/// Word-bounded, non-overlapping occurrences over a char vector.
pub fn oracle_raw_count(raw: &str, needle: &str) -> u64 {
    let text: Vec<char> = raw.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ").chars().collect();
    let pat: Vec<char> = needle.chars().collect();
    if pat.is_empty() {
        return 0;
    }
    let (mut i, mut n) = (0, 0);
    while i + pat.len() <= text.len() {
        let hit = text[i..i + pat.len()] == pat[..]
            && !is_word_char(i.checked_sub(1).map(|p| text[p]))
            && !is_word_char(text.get(i + pat.len()).copied());
        if hit {
            n += 1;
            i += pat.len();
        } else {
            i += 1;
        }
    }
    n
}

/// Per-issue, per-rule counts from the exhaustive oracle.
pub fn oracle_match(tokens: &[String], raw: &str, taxonomy: &IssueTaxonomy) -> Vec<Vec<u64>> {
    taxonomy
        .issues
        .iter()
        .map(|issue| {
            let mut counts = oracle_phrase_counts(tokens, &issue.rules);
            for (r, rule) in issue.rules.iter().enumerate() {
                match rule {
                    KeywordRule::Phrase { .. } => {}
                    KeywordRule::RawText { text, .. } => counts[r] = oracle_raw_count(raw, text),
                    KeywordRule::Cooccur { all_of, .. } => {
                        let present = |p: &Vec<String>| tokens.windows(p.len()).any(|w| w == &p[..]);
                        counts[r] = u64::from(all_of.iter().all(|alts| alts.iter().any(present)));
                    }
                }
            }
            counts
        })
        .collect()
}

// ------------------------------------------------------------- chi-square

/// `ln Gamma(s)` for positive integer or half-integer `s`, by exact products.
pub fn ln_gamma_half_integer(s: f64) -> f64 {
    let twice = (2.0 * s).round() as i64;
    assert!(twice >= 1 && (2.0 * s - twice as f64).abs() < 1e-12);
    let mut acc = if twice % 2 == 0 { 0.0 } else { std::f64::consts::PI.sqrt().ln() };
    let mut x = if twice % 2 == 0 { 1.0 } else { 0.5 };
    while x < s - 1e-9 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Kahan-compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let (mut sum, mut c) = (0.0_f64, 0.0_f64);
    for t in terms {
        let y = t - c;
        let next = sum + y;
        c = (next - sum) - y;
        sum = next;
    }
    sum
}

/// Lower regularized incomplete gamma by its power series, 1e5 terms,
/// Kahan-summed: `P(s,x) = x^s e^-x sum x^n / Gamma(s+n+1)`.
pub fn series_gamma_p(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let lead = s * x.ln() - x - ln_gamma_half_integer(s + 1.0);
    let mut term = lead.exp();
    let terms = (0..100_000).map(|n| {
        let t = term;
        term *= x / (s + n as f64 + 1.0);
        t
    });
    kahan_sum(terms)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let inner = (1..n).map(|i| {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        w * f(a + h * i as f64)
    });
    (f(a) + f(b) + kahan_sum(inner)) * h / 3.0
}

/// `erfc(z)` for `z >= 0` as `e^-z^2 * (2/sqrt(pi)) * int_0^L e^-(t^2 + 2zt) dt`.
pub fn erfc_simpson(z: f64) -> f64 {
    let upper = 12.0;
    let integral = simpson(|t| (-(t * t + 2.0 * z * t)).exp(), 0.0, upper, 400_000);
    (-z * z).exp() * 2.0 / std::f64::consts::PI.sqrt() * integral
}

/// Chi-square survival function from closed forms: a finite Poisson sum
/// for even df, erfc plus the upward recurrence for odd df.
pub fn oracle_chi2_sf(stat: f64, df: usize) -> f64 {
    let x = stat / 2.0;
    if df % 2 == 0 {
        let m = df / 2;
        let mut term = (-x).exp();
        let mut terms = Vec::with_capacity(m);
        for k in 0..m {
            terms.push(term);
            term *= x / (k as f64 + 1.0);
        }
        kahan_sum(terms)
    } else {
        let mut q = erfc_simpson(x.sqrt());
        let mut s = 0.5;
        let mut extra = Vec::new();
        while s < df as f64 / 2.0 - 1e-9 {
            extra.push((s * x.ln() - x - ln_gamma_half_integer(s + 1.0)).exp());
            s += 1.0;
        }
        if x > 0.0 {
            q += kahan_sum(extra);
        }
        q
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ----------------------------------------------------------------- HDBSCAN

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Core distance by full sort: the point itself sits at index 0, so the
/// `min_samples`-th other point is at index `min_samples`.
pub fn oracle_core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| dist(p, q)).collect();
            d.sort_by(f64::total_cmp);
            d[min_samples]
        })
        .collect()
}

fn uf_find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Kruskal MST weight over the complete mutual-reachability graph.
pub fn kruskal_mst_weight(points: &[Vec<f64>], cores: &[f64]) -> f64 {
    let n = points.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push((dist(&points[i], &points[j]).max(cores[i]).max(cores[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut total = Vec::new();
    for (w, i, j) in edges {
        let (ri, rj) = (uf_find(&mut parent, i), uf_find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            total.push(w);
        }
    }
    kahan_sum(total)
}

/// True when two labelings induce the same partition, noise kept as its own label.
pub fn same_partition(a: &[i64], b: &[i64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<i64, i64> = HashMap::new();
    let mut back: HashMap<i64, i64> = HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Adjusted Rand index from the contingency table.
pub fn oracle_ari(a: &[i64], b: &[i64]) -> f64 {
    let n = a.len() as f64;
    let mut table: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    let mut ra: BTreeMap<i64, f64> = BTreeMap::new();
    let mut rb: BTreeMap<i64, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let c2 = |m: f64| m * (m - 1.0) / 2.0;
    let index: f64 = table.values().map(|&m| c2(m)).sum();
    let sa: f64 = ra.values().map(|&m| c2(m)).sum();
    let sb: f64 = rb.values().map(|&m| c2(m)).sum();
    let expected = sa * sb / c2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}

// -------------------------------------------------------------------- UMAP

/// Bisection for `sum exp(-max(0, d - rho) / sigma) = log2(k)` to `tol`.
pub fn oracle_sigma(dists: &[f64], k: usize, tol: f64) -> f64 {
    let rho = dists.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
    let target = (k as f64).log2();
    let f = |s: f64| dists.iter().map(|&d| (-(d - rho).max(0.0) / s).exp()).sum::<f64>() - target;
    let (mut lo, mut hi) = (1e-12, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn curve_sse(a: f64, b: f64, min_dist: f64, spread: f64) -> f64 {
    let n = 300;
    let hi = 3.0 * spread;
    (0..n)
        .map(|i| {
            let x = hi * i as f64 / (n - 1) as f64;
            let target = if x <= min_dist { 1.0 } else { (-(x - min_dist) / spread).exp() };
            let fit = 1.0 / (1.0 + a * x.powf(2.0 * b));
            (fit - target).powi(2)
        })
        .sum()
}

/// Derivative-free Nelder-Mead minimization of the curve residual.
pub fn nelder_mead_curve(min_dist: f64, spread: f64) -> (f64, f64) {
    let f = |p: [f64; 2]| {
        if p[0] <= 0.0 || p[1] <= 0.0 {
            f64::INFINITY
        } else {
            curve_sse(p[0], p[1], min_dist, spread)
        }
    };
    let mut simplex = [[1.0, 1.0], [1.5, 1.0], [1.0, 1.5]];
    for _ in 0..5000 {
        simplex.sort_by(|x, y| f(*x).total_cmp(&f(*y)));
        let [best, mid, worst] = simplex;
        if (f(worst) - f(best)).abs() < 1e-16 && dist(&best, &worst) < 1e-10 {
            break;
        }
        let c = [(best[0] + mid[0]) / 2.0, (best[1] + mid[1]) / 2.0];
        let at = |t: f64| [c[0] + t * (worst[0] - c[0]), c[1] + t * (worst[1] - c[1])];
        let r = at(-1.0);
        if f(r) < f(best) {
            let e = at(-2.0);
            simplex[2] = if f(e) < f(r) { e } else { r };
        } else if f(r) < f(mid) {
            simplex[2] = r;
        } else {
            let k = if f(r) < f(worst) { at(-0.5) } else { at(0.5) };
            if k.iter().all(|v| v.is_finite()) && f(k) < f(worst).min(f(r)) {
                simplex[2] = k;
            } else {
                for p in simplex.iter_mut().skip(1) {
                    *p = [(p[0] + best[0]) / 2.0, (p[1] + best[1]) / 2.0];
                }
            }
        }
    }
    simplex.sort_by(|x, y| f(*x).total_cmp(&f(*y)));
    (simplex[0][0], simplex[0][1])
}

/// Central-difference gradient of `f` at `x`.
pub fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Trustworthiness by explicit rank tables.
pub fn oracle_trustworthiness(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    let n = high.len();
    let ranks = |pts: &[Vec<f64>], i: usize| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.sort_by(|&a, &b| dist(&pts[i], &pts[a]).total_cmp(&dist(&pts[i], &pts[b])).then(a.cmp(&b)));
        idx
    };
    let mut penalty = 0.0;
    for i in 0..n {
        let hi_order = ranks(high, i);
        let lo_order = ranks(low, i);
        for &j in &lo_order[..k] {
            let r = hi_order.iter().position(|&x| x == j).unwrap() + 1;
            if r > k {
                penalty += (r - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}
