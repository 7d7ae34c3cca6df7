//! Comment text normalization and per-(day, channel) grouping.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{day_index, Channel, Comment, Corpus, DayIndex};

const DEFAULT_STOPWORDS: &str = include_str!("../resources/stopwords_en.txt");

/// Lowercase alphabetic tokens in original order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenList {
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn to_text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordSet {
    words: BTreeSet<String>,
    source_name: String,
}

impl StopwordSet {
    /// The shipped English list.
    pub fn default_english() -> Self {
        Self::parse(DEFAULT_STOPWORDS, "builtin:stopwords_en")
    }

    pub fn empty() -> Self {
        StopwordSet {
            words: BTreeSet::new(),
            source_name: "empty".into(),
        }
    }

    pub fn from_words<I, S>(words: I, source_name: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordSet {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
            source_name: source_name.to_string(),
        }
    }

    /// One word per line; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, source_name: &str) -> Self {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
            source_name,
        )
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::parse(&text, &path.display().to_string()))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Splits on whitespace and on every non-alphanumeric character except
/// apostrophes, lowercases, strips edge apostrophes, then drops tokens that
/// are not purely alphabetic ("100", "j6", "don't") and stopwords.
pub fn normalize(text: &str, stopwords: &StopwordSet) -> TokenList {
    let tokens = text
        .split(|c: char| !(c.is_alphanumeric() || is_apostrophe(c)))
        .map(|raw| raw.trim_matches(is_apostrophe).to_lowercase())
        .filter(|t| !t.is_empty() && t.chars().all(char::is_alphabetic))
        .filter(|t| !stopwords.contains(t))
        .collect();
    TokenList { tokens }
}

/// Like [`normalize`] for raw bytes; invalid UTF-8 sequences are replaced
/// and the number of replacement characters introduced is returned.
pub fn normalize_bytes(bytes: &[u8], stopwords: &StopwordSet) -> (TokenList, usize) {
    let text = String::from_utf8_lossy(bytes);
    let replaced = match &text {
        std::borrow::Cow::Borrowed(_) => 0,
        std::borrow::Cow::Owned(s) => {
            s.matches('\u{FFFD}').count()
                - bytes_replacement_count(bytes)
        }
    };
    (normalize(&text, stopwords), replaced)
}

// U+FFFD already present in valid parts of the input must not be counted.
fn bytes_replacement_count(bytes: &[u8]) -> usize {
    bytes.windows(3).filter(|w| *w == [0xEF, 0xBF, 0xBD]).count()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub day: DayIndex,
    pub channel: Channel,
}

/// Concatenated token stream of one group with per-comment boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupStream {
    pub tokens: Vec<String>,
    /// `boundaries[i]..boundaries[i + 1]` is the i-th member comment.
    pub boundaries: Vec<usize>,
    pub comment_ids: Vec<String>,
}

impl GroupStream {
    pub fn comment_tokens(&self, i: usize) -> &[String] {
        &self.tokens[self.boundaries[i]..self.boundaries[i + 1]]
    }

    pub fn num_comments(&self) -> usize {
        self.comment_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupedText {
    pub groups: BTreeMap<GroupKey, GroupStream>,
}

impl GroupedText {
    pub fn total_tokens(&self) -> usize {
        self.groups.values().map(|g| g.tokens.len()).sum()
    }
}

/// In-window comments sorted by `(published_at, comment_id)`.
pub fn analysis_order(corpus: &Corpus) -> Vec<&Comment> {
    let mut comments: Vec<&Comment> = corpus.analyzed_comments().collect();
    comments.sort_by(|a, b| (a.published_at, &a.comment_id).cmp(&(b.published_at, &b.comment_id)));
    comments
}

pub fn group_concat(corpus: &Corpus, stopwords: &StopwordSet) -> GroupedText {
    let mut groups: BTreeMap<GroupKey, GroupStream> = BTreeMap::new();
    for c in analysis_order(corpus) {
        let day = day_index(&c.published_at, &corpus.window)
            .expect("analysis_order yields in-window comments");
        let key = GroupKey {
            day,
            channel: c.channel.clone(),
        };
        let group = groups.entry(key).or_insert_with(|| GroupStream {
            boundaries: vec![0],
            ..Default::default()
        });
        group.tokens.extend(normalize(&c.text, stopwords).tokens);
        group.boundaries.push(group.tokens.len());
        group.comment_ids.push(c.comment_id.clone());
    }
    GroupedText { groups }
}
