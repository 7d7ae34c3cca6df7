use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KeywordError;
use crate::textprep::{normalize, StopwordSet};

/// Shipped issue taxonomy: five issue areas with their keyword lists.
pub const DEFAULT_TAXONOMY_JSON: &str = include_str!("../../resources/taxonomy_default.json");

/// How a keyword is matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Phrase,
    Cooccur,
}

/// One compiled keyword.
///
/// Phrase tokens go through the same normalizer as comment text, so a
/// keyword like "Cost of living" becomes `[cost, living]` under the default
/// stopword list. Keywords with digits ("J6", "January 6") cannot survive
/// the alphabetic token rule and are matched on raw lowercased text instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeywordRule {
    Phrase { label: String, tokens: Vec<String> },
    RawText { label: String, text: String },
    /// Every term list must be satisfied somewhere in one comment; a list is
    /// satisfied when any of its alternative phrases occurs.
    Cooccur {
        label: String,
        all_of: Vec<Vec<Vec<String>>>,
    },
}

impl KeywordRule {
    pub fn label(&self) -> &str {
        match self {
            KeywordRule::Phrase { label, .. }
            | KeywordRule::RawText { label, .. }
            | KeywordRule::Cooccur { label, .. } => label,
        }
    }

    pub fn kind(&self) -> RuleKind {
        match self {
            KeywordRule::Cooccur { .. } => RuleKind::Cooccur,
            _ => RuleKind::Phrase,
        }
    }

    pub fn raw_text_fallback(&self) -> bool {
        matches!(self, KeywordRule::RawText { .. })
    }

    /// Every token this rule can match on, used for term-overlap scoring.
    pub fn tokens(&self) -> Vec<String> {
        match self {
            KeywordRule::Phrase { tokens, .. } => tokens.clone(),
            KeywordRule::RawText { text, .. } => text
                .split_whitespace()
                .filter(|w| w.chars().all(char::is_alphabetic))
                .map(str::to_string)
                .collect(),
            KeywordRule::Cooccur { all_of, .. } => all_of.iter().flatten().flatten().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub name: String,
    pub rules: Vec<KeywordRule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueTaxonomy {
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeywordSpec {
    Text(String),
    AllOf { all_of: Vec<Vec<String>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssueSpec {
    pub name: String,
    pub keywords: Vec<KeywordSpec>,
}

/// On-disk taxonomy document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub issues: Vec<IssueSpec>,
}

fn needs_raw_match(keyword: &str) -> bool {
    keyword
        .split_whitespace()
        .any(|w| w.chars().any(|c| c.is_ascii_digit() || c.is_numeric()))
}

fn compile_phrase(text: &str, stopwords: &StopwordSet) -> Vec<String> {
    normalize(text, stopwords).tokens
}

impl IssueTaxonomy {
    /// The shipped default, compiled with `stopwords`.
    pub fn default_with(stopwords: &StopwordSet) -> Self {
        Self::from_json(DEFAULT_TAXONOMY_JSON, stopwords).expect("shipped taxonomy is valid")
    }

    pub fn load(path: &Path, stopwords: &StopwordSet) -> Result<Self, KeywordError> {
        let text = fs::read_to_string(path).map_err(|source| KeywordError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, stopwords)
    }

    pub fn from_json(text: &str, stopwords: &StopwordSet) -> Result<Self, KeywordError> {
        let file: TaxonomyFile =
            serde_json::from_str(text).map_err(|e| KeywordError::Schema(e.to_string()))?;
        Self::compile(&file, stopwords)
    }

    pub fn compile(file: &TaxonomyFile, stopwords: &StopwordSet) -> Result<Self, KeywordError> {
        if file.issues.is_empty() {
            return Err(KeywordError::Schema("taxonomy has no issues".into()));
        }
        let mut names = HashSet::new();
        let mut issues = Vec::with_capacity(file.issues.len());
        for spec in &file.issues {
            let name = spec.name.trim();
            if name.is_empty() {
                return Err(KeywordError::Schema("issue with empty name".into()));
            }
            if !names.insert(name.to_lowercase()) {
                return Err(KeywordError::Schema(format!("duplicate issue {name:?}")));
            }
            if spec.keywords.is_empty() {
                return Err(KeywordError::Schema(format!("issue {name:?} has no keywords")));
            }
            let mut rules = Vec::with_capacity(spec.keywords.len());
            for kw in &spec.keywords {
                rules.push(compile_rule(name, kw, stopwords)?);
            }
            issues.push(Issue {
                name: name.to_string(),
                rules,
            });
        }
        Ok(IssueTaxonomy { issues })
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.issues.iter().map(|i| i.name.clone()).collect()
    }

    pub fn rule_count(&self) -> usize {
        self.issues.iter().map(|i| i.rules.len()).sum()
    }

    /// Case-insensitive lookup of an issue index by name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let name = name.trim().to_lowercase();
        self.issues.iter().position(|i| i.name.to_lowercase() == name)
    }
}

fn compile_rule(
    issue: &str,
    kw: &KeywordSpec,
    stopwords: &StopwordSet,
) -> Result<KeywordRule, KeywordError> {
    let empty = |label: &str| {
        KeywordError::Schema(format!("issue {issue:?}: keyword {label:?} has no matchable tokens"))
    };
    match kw {
        KeywordSpec::Text(text) => {
            let label = text.trim().to_string();
            if label.is_empty() {
                return Err(empty(text));
            }
            if needs_raw_match(&label) {
                let text = label
                    .to_lowercase()
                    .split_whitespace()
                    .collect::<Vec<_>>()
                    .join(" ");
                return Ok(KeywordRule::RawText { label, text });
            }
            let tokens = compile_phrase(&label, stopwords);
            if tokens.is_empty() {
                return Err(empty(&label));
            }
            Ok(KeywordRule::Phrase { label, tokens })
        }
        KeywordSpec::AllOf { all_of } => {
            let label = all_of
                .iter()
                .map(|alts| alts.join("|"))
                .collect::<Vec<_>>()
                .join(" + ");
            if all_of.len() < 2 {
                return Err(KeywordError::Schema(format!(
                    "issue {issue:?}: all_of rule {label:?} needs at least two term lists"
                )));
            }
            let mut lists = Vec::with_capacity(all_of.len());
            for alts in all_of {
                let compiled: Vec<Vec<String>> = alts
                    .iter()
                    .map(|a| compile_phrase(a, stopwords))
                    .filter(|t| !t.is_empty())
                    .collect();
                if compiled.is_empty() {
                    return Err(empty(&label));
                }
                lists.push(compiled);
            }
            Ok(KeywordRule::Cooccur {
                label,
                all_of: lists,
            })
        }
    }
}
