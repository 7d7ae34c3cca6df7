//! Keyword method: count issue keyword occurrences per (day, channel).

mod table;
mod taxonomy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use table::{CellKey, MethodTag, SalienceTable};
pub use taxonomy::{
    Issue, IssueSpec, IssueTaxonomy, KeywordRule, KeywordSpec, RuleKind, TaxonomyFile,
    DEFAULT_TAXONOMY_JSON,
};

use crate::corpus::{Comment, Corpus};
use crate::textprep::{group_concat, normalize, StopwordSet, TokenList};

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("taxonomy schema error: {0}")]
    Schema(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Whether each keyword occurrence counts, or each comment counts at most
/// once per issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingUnit {
    #[default]
    Occurrences,
    Comments,
}

/// Per-issue counts (taxonomy order) with a per-rule breakdown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchCounts {
    pub issues: Vec<String>,
    pub per_issue: Vec<u64>,
    pub per_rule: Vec<Vec<u64>>,
}

impl MatchCounts {
    fn zeros(taxonomy: &IssueTaxonomy) -> Self {
        MatchCounts {
            issues: taxonomy.names(),
            per_issue: vec![0; taxonomy.len()],
            per_rule: taxonomy.issues.iter().map(|i| vec![0; i.rules.len()]).collect(),
        }
    }

    pub fn get(&self, issue: &str) -> u64 {
        self.issues
            .iter()
            .position(|n| n == issue)
            .map(|i| self.per_issue[i])
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.per_issue.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.total() == 0
    }
}

/// Precomputed matching tables for a taxonomy.
#[derive(Debug, Clone)]
pub struct Matcher<'a> {
    taxonomy: &'a IssueTaxonomy,
    /// Per issue: first token -> (rule index, phrase tokens), longest phrase first.
    phrase_index: Vec<HashMap<&'a str, Vec<(usize, &'a [String])>>>,
}

impl<'a> Matcher<'a> {
    pub fn new(taxonomy: &'a IssueTaxonomy) -> Self {
        let phrase_index = taxonomy
            .issues
            .iter()
            .map(|issue| {
                let mut index: HashMap<&str, Vec<(usize, &[String])>> = HashMap::new();
                for (r, rule) in issue.rules.iter().enumerate() {
                    if let KeywordRule::Phrase { tokens, .. } = rule {
                        index.entry(tokens[0].as_str()).or_default().push((r, tokens));
                    }
                }
                for candidates in index.values_mut() {
                    candidates.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
                }
                index
            })
            .collect();
        Matcher {
            taxonomy,
            phrase_index,
        }
    }

    /// Counts keyword matches in one comment.
    ///
    /// Phrase rules scan left to right; at each position the longest phrase
    /// of the issue that matches is counted and its tokens are consumed, so
    /// "border crisis" yields one count rather than also counting "border".
    /// Issues are scanned independently. Co-occurrence rules add at most one
    /// per comment. Raw-text rules count word-bounded occurrences in the
    /// lowercased raw text.
    pub fn match_comment(&self, tokens: &TokenList, raw_text: &str, unit: CountingUnit) -> MatchCounts {
        let mut counts = MatchCounts::zeros(self.taxonomy);
        let raw_lower = collapse_whitespace(&raw_text.to_lowercase());
        let toks = &tokens.tokens;
        for (i, issue) in self.taxonomy.issues.iter().enumerate() {
            let index = &self.phrase_index[i];
            let rule_counts = &mut counts.per_rule[i];
            let mut pos = 0;
            while pos < toks.len() {
                let hit = index.get(toks[pos].as_str()).and_then(|cands| {
                    cands
                        .iter()
                        .find(|(_, phrase)| toks[pos..].starts_with(phrase))
                });
                match hit {
                    Some((r, phrase)) => {
                        rule_counts[*r] += 1;
                        pos += phrase.len();
                    }
                    None => pos += 1,
                }
            }
            for (r, rule) in issue.rules.iter().enumerate() {
                match rule {
                    KeywordRule::Phrase { .. } => {}
                    KeywordRule::RawText { text, .. } => {
                        rule_counts[r] += count_word_bounded(&raw_lower, text);
                    }
                    KeywordRule::Cooccur { all_of, .. } => {
                        let satisfied = all_of
                            .iter()
                            .all(|alts| alts.iter().any(|p| contains_phrase(toks, p)));
                        if satisfied {
                            rule_counts[r] += 1;
                        }
                    }
                }
            }
            if unit == CountingUnit::Comments {
                if let Some(first) = rule_counts.iter().position(|&c| c > 0) {
                    rule_counts.iter_mut().for_each(|c| *c = 0);
                    rule_counts[first] = 1;
                }
            }
            counts.per_issue[i] = rule_counts.iter().sum();
        }
        counts
    }
}

/// Convenience wrapper around [`Matcher::match_comment`] with occurrence counting.
pub fn match_comment(tokens: &TokenList, raw_text: &str, taxonomy: &IssueTaxonomy) -> MatchCounts {
    Matcher::new(taxonomy).match_comment(tokens, raw_text, CountingUnit::Occurrences)
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Non-overlapping occurrences of `needle` in `haystack` whose neighbours
/// are not alphanumeric.
fn count_word_bounded(haystack: &str, needle: &str) -> u64 {
    if needle.is_empty() {
        return 0;
    }
    let mut count = 0;
    let mut from = 0;
    while let Some(off) = haystack[from..].find(needle) {
        let start = from + off;
        let end = start + needle.len();
        let before_ok = haystack[..start]
            .chars()
            .next_back()
            .map_or(true, |c| !c.is_alphanumeric());
        let after_ok = haystack[end..].chars().next().map_or(true, |c| !c.is_alphanumeric());
        if before_ok && after_ok {
            count += 1;
            from = end;
        } else {
            from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
        }
    }
    count
}

/// Keyword-method salience table over the in-window comments of `corpus`.
///
/// Matching runs per comment inside each (day, channel) group, so a phrase
/// can never straddle two comments.
pub fn salience_table_keywords(
    corpus: &Corpus,
    taxonomy: &IssueTaxonomy,
    stopwords: &StopwordSet,
    unit: CountingUnit,
) -> SalienceTable {
    let grouped = group_concat(corpus, stopwords);
    let by_id: HashMap<&str, &Comment> = corpus
        .comments
        .iter()
        .map(|c| (c.comment_id.as_str(), c))
        .collect();
    let matcher = Matcher::new(taxonomy);
    let mut table = SalienceTable::new(MethodTag::KeywordMethod, taxonomy.names());
    for (key, group) in &grouped.groups {
        for (i, id) in group.comment_ids.iter().enumerate() {
            let tokens = TokenList {
                tokens: group.comment_tokens(i).to_vec(),
            };
            let raw = &by_id[id.as_str()].text;
            let counts = matcher.match_comment(&tokens, raw, unit);
            for (issue, &n) in counts.per_issue.iter().enumerate() {
                table.add(issue, key.day, &key.channel, n);
            }
        }
    }
    table
}

/// Keyword matches for a single raw comment text.
pub fn match_text(text: &str, taxonomy: &IssueTaxonomy, stopwords: &StopwordSet) -> MatchCounts {
    match_comment(&normalize(text, stopwords), text, taxonomy)
}
