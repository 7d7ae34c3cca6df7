//! Cluster summaries, cluster labels and the off-topic filter.
//!
//! Each cluster is summarized by TF-IDF top terms and sample comments, then
//! labeled as one taxonomy issue or a new category, either by a chat model
//! ([`llm_label`]) or by keyword overlap ([`fallback_label`]). Comments in
//! noise or new-category clusters are excluded with a recorded reason.

mod llm;
mod tfidf;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterAssignment, NOISE};
use crate::keywords::IssueTaxonomy;

pub use llm::{
    llm_label, parse_response, prompt_key, ChatClient, HttpChatClient, ReplayClient,
    STRICT_REMINDER,
};
pub use tfidf::{medoid, summarize_clusters, ClusterSummary, TermScore, TfidfModel};

/// Shipped prompt template, version 1.
pub const PROMPT_TEMPLATE_V1: &str = include_str!("../../resources/label_prompt_v1.txt");
pub const PROMPT_VERSION: &str = "label_prompt_v1";

const MAX_SAMPLE_CHARS: usize = 300;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("chat transport error: {0}")]
    Transport(String),
    #[error("chat quota exceeded: {0}")]
    Quota(String),
    #[error("no cached response for prompt {key}")]
    CacheMiss { key: String },
    #[error("unparseable label response: {raw:?}")]
    ParseFailure { raw: String },
    #[error("replay cache io error: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("cluster {0} has no label decision")]
    MissingDecision(usize),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("labeler {0:?} needs a chat client")]
    NoClient(LabelerMode),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum LabelOutcome {
    Predefined(String),
    NewCategory(String),
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Llm,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDecision {
    pub cluster_id: usize,
    pub outcome: LabelOutcome,
    pub source: LabelSource,
    pub raw_response: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelerMode {
    Llm,
    #[default]
    Fallback,
    LlmWithFallback,
}

impl std::str::FromStr for LabelerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "llm" => Ok(LabelerMode::Llm),
            "fallback" => Ok(LabelerMode::Fallback),
            "llm-with-fallback" => Ok(LabelerMode::LlmWithFallback),
            other => Err(format!("unknown labeler {other:?}")),
        }
    }
}

fn one_line(text: &str) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match flat.char_indices().nth(MAX_SAMPLE_CHARS) {
        Some((cut, _)) => format!("{}...", &flat[..cut]),
        None => flat,
    }
}

/// Renders [`PROMPT_TEMPLATE_V1`] for one cluster.
pub fn build_prompt(summary: &ClusterSummary, taxonomy: &IssueTaxonomy) -> String {
    let categories = taxonomy
        .issues
        .iter()
        .map(|i| format!("- {}", i.name))
        .collect::<Vec<_>>()
        .join("\n");
    let terms = summary
        .top_terms
        .iter()
        .map(|t| format!("- {} ({:.3})", t.term, t.score))
        .collect::<Vec<_>>()
        .join("\n");
    let samples = if summary.sample_comments.is_empty() {
        String::new()
    } else {
        let lines: Vec<String> = summary
            .sample_comments
            .iter()
            .map(|s| format!("- {}", one_line(s)))
            .collect();
        format!("\nSample comments from the cluster:\n{}\n", lines.join("\n"))
    };
    PROMPT_TEMPLATE_V1
        .replace("{categories}", &categories)
        .replace("{terms}", &terms)
        .replace("{samples}", &samples)
}

/// Default share of top-term score mass the winning issue must reach.
pub const DEFAULT_THETA: f64 = 0.25;

/// Keyword-overlap labeler: each issue scores the summed score of top terms
/// that occur among its keyword tokens.
pub fn fallback_label(summary: &ClusterSummary, taxonomy: &IssueTaxonomy, theta: f64) -> LabelDecision {
    let mass: f64 = summary.top_terms.iter().map(|t| t.score).sum();
    let scores: Vec<f64> = taxonomy
        .issues
        .iter()
        .map(|issue| {
            let vocab: BTreeSet<String> = issue.rules.iter().flat_map(|r| r.tokens()).collect();
            summary
                .top_terms
                .iter()
                .filter(|t| vocab.contains(&t.term))
                .map(|t| t.score)
                .sum()
        })
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    let outcome = if scores[best] > 0.0 && scores[best] >= theta * mass {
        LabelOutcome::Predefined(taxonomy.issues[best].name.clone())
    } else {
        LabelOutcome::NewCategory("other".into())
    };
    let detail = taxonomy
        .issues
        .iter()
        .zip(&scores)
        .map(|(i, s)| format!("{}={s:.6}", i.name))
        .collect::<Vec<_>>()
        .join(";");
    LabelDecision {
        cluster_id: summary.cluster_id,
        outcome,
        source: LabelSource::Fallback,
        raw_response: format!("fallback mass={mass:.6} theta={theta};{detail}"),
    }
}

/// Labels every summary with the chosen strategy.
///
/// In `Llm` mode an unparseable answer yields [`LabelOutcome::Unlabeled`];
/// in `LlmWithFallback` mode it yields the fallback decision.
pub fn label_clusters(
    summaries: &[ClusterSummary],
    taxonomy: &IssueTaxonomy,
    mode: LabelerMode,
    client: Option<&dyn ChatClient>,
    theta: f64,
) -> Result<Vec<LabelDecision>, LabelError> {
    summaries
        .iter()
        .map(|s| {
            if mode == LabelerMode::Fallback {
                return Ok(fallback_label(s, taxonomy, theta));
            }
            let client = client.ok_or(LabelError::NoClient(mode))?;
            match llm_label(client, &build_prompt(s, taxonomy), taxonomy, s.cluster_id) {
                Ok(d) => Ok(d),
                Err(LlmError::ParseFailure { raw }) => Ok(match mode {
                    LabelerMode::LlmWithFallback => {
                        log::warn!("cluster {}: unparseable answer, using fallback labeler", s.cluster_id);
                        fallback_label(s, taxonomy, theta)
                    }
                    _ => LabelDecision {
                        cluster_id: s.cluster_id,
                        outcome: LabelOutcome::Unlabeled,
                        source: LabelSource::Llm,
                        raw_response: raw,
                    },
                }),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    Noise,
    NewCategory(String),
    Unlabeled,
    DegenerateText,
    OutOfWindow,
}

impl ExclusionReason {
    /// Reason class without the category name.
    pub fn class(&self) -> &'static str {
        match self {
            ExclusionReason::Noise => "noise",
            ExclusionReason::NewCategory(_) => "new_category",
            ExclusionReason::Unlabeled => "unlabeled",
            ExclusionReason::DegenerateText => "degenerate_text",
            ExclusionReason::OutOfWindow => "out_of_window",
        }
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::NewCategory(name) => write!(f, "new_category:{name}"),
            other => f.write_str(other.class()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub comment_id: String,
    pub cluster: i64,
    pub issue: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedComment {
    pub comment_id: String,
    pub cluster: i64,
    pub reason: ExclusionReason,
}

/// Issue-labeled comments plus everything set aside, in assignment order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FilteredAssignment {
    pub labeled: Vec<LabeledComment>,
    pub excluded: Vec<ExcludedComment>,
}

impl FilteredAssignment {
    /// Records comments that never reached clustering.
    pub fn exclude_all<I: IntoIterator<Item = String>>(&mut self, ids: I, reason: ExclusionReason) {
        self.excluded.extend(ids.into_iter().map(|comment_id| ExcludedComment {
            comment_id,
            cluster: NOISE,
            reason: reason.clone(),
        }));
    }

    /// Excluded counts per reason class.
    pub fn excluded_by_class(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for e in &self.excluded {
            *out.entry(e.reason.class()).or_insert(0) += 1;
        }
        out
    }
}

/// Keeps comments whose cluster was labeled with a taxonomy issue.
pub fn filter_offtopic(
    assignment: &ClusterAssignment,
    decisions: &[LabelDecision],
    taxonomy: &IssueTaxonomy,
) -> Result<FilteredAssignment, LabelError> {
    let by_cluster: BTreeMap<usize, &LabelDecision> = decisions.iter().map(|d| (d.cluster_id, d)).collect();
    for c in 0..assignment.cluster_count {
        if !by_cluster.contains_key(&c) {
            return Err(LabelError::MissingDecision(c));
        }
    }
    let mut out = FilteredAssignment::default();
    for (id, &label) in assignment.ids.iter().zip(&assignment.labels) {
        let reason = if label == NOISE {
            Some(ExclusionReason::Noise)
        } else {
            match &by_cluster[&(label as usize)].outcome {
                LabelOutcome::Predefined(name) => {
                    let issue = taxonomy
                        .index_of(name)
                        .expect("predefined outcomes name taxonomy issues");
                    out.labeled.push(LabeledComment {
                        comment_id: id.clone(),
                        cluster: label,
                        issue,
                    });
                    None
                }
                LabelOutcome::NewCategory(name) => Some(ExclusionReason::NewCategory(name.clone())),
                LabelOutcome::Unlabeled => Some(ExclusionReason::Unlabeled),
            }
        };
        if let Some(reason) = reason {
            out.excluded.push(ExcludedComment {
                comment_id: id.clone(),
                cluster: label,
                reason,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::ClustererConfig;
    use crate::textprep::StopwordSet;

    fn taxonomy() -> IssueTaxonomy {
        IssueTaxonomy::default_with(&StopwordSet::default_english())
    }

    fn summary(terms: &[(&str, f64)]) -> ClusterSummary {
        ClusterSummary {
            cluster_id: 0,
            size: 3,
            top_terms: terms
                .iter()
                .map(|&(t, s)| TermScore {
                    term: t.into(),
                    score: s,
                })
                .collect(),
            sample_comments: vec![],
        }
    }

    #[test]
    fn fallback_examples() {
        let tax = taxonomy();
        let d = fallback_label(&summary(&[("border", 2.0), ("migrant", 1.4)]), &tax, DEFAULT_THETA);
        assert_eq!(d.outcome, LabelOutcome::Predefined("Immigration".into()));
        let d = fallback_label(&summary(&[("puppies", 3.0)]), &tax, DEFAULT_THETA);
        assert_eq!(d.outcome, LabelOutcome::NewCategory("other".into()));
        let d = fallback_label(&summary(&[("inflation", 1.0), ("border", 1.0)]), &tax, DEFAULT_THETA);
        assert_eq!(d.outcome, LabelOutcome::Predefined("Immigration".into()));
    }

    #[test]
    fn prompt_rendering() {
        let tax = taxonomy();
        let p = build_prompt(&summary(&[("border", 2.0)]), &tax);
        assert!(p.contains("- Immigration") && p.contains("- border (2.000)"));
        assert!(!p.contains("Sample comments") && !p.contains('{'));
        let mut s = summary(&[("border", 2.0)]);
        s.sample_comments = vec!["Secure the\nborder".into()];
        let p2 = build_prompt(&s, &tax);
        assert!(p2.contains("- Secure the border"));
        assert_eq!(p2, build_prompt(&s, &tax));
    }

    #[test]
    fn grammar_parsing() {
        let tax = taxonomy();
        assert_eq!(
            parse_response("\n  democracy \nextra", &tax),
            Some(LabelOutcome::Predefined("Democracy".into()))
        );
        assert_eq!(
            parse_response("NEW: Foreign Policy", &tax),
            Some(LabelOutcome::NewCategory("Foreign Policy".into()))
        );
        assert_eq!(parse_response("NEW:", &tax), None);
        assert_eq!(parse_response("these comments are about many things", &tax), None);
    }

    #[test]
    fn filter_and_missing_decision() {
        let tax = taxonomy();
        let assignment = ClusterAssignment {
            ids: (0..5).map(|i| format!("c{i}")).collect(),
            labels: vec![0, 1, NOISE, 0, 1],
            cluster_count: 2,
            config: ClustererConfig::default(),
        };
        let decision = |c, outcome| LabelDecision {
            cluster_id: c,
            outcome,
            source: LabelSource::Fallback,
            raw_response: String::new(),
        };
        let decisions = vec![
            decision(0, LabelOutcome::Predefined("Inflation".into())),
            decision(1, LabelOutcome::NewCategory("Sports".into())),
        ];
        let f = filter_offtopic(&assignment, &decisions, &tax).unwrap();
        assert_eq!(f.labeled.len(), 2);
        assert!(f.labeled.iter().all(|l| l.issue == 1));
        assert_eq!(f.excluded.len(), 3);
        assert_eq!(f.excluded[0].reason.to_string(), "new_category:Sports");
        assert!(matches!(
            filter_offtopic(&assignment, &decisions[..1], &tax),
            Err(LabelError::MissingDecision(1))
        ));
    }
}
