use std::collections::HashSet;
use std::fmt;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Channel identifier, e.g. `NYT`, `WSJ`, or any custom label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Channel(pub String);

impl Channel {
    pub fn new(name: impl Into<String>) -> Self {
        Channel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Channel {
    fn from(s: &str) -> Self {
        Channel(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Video {
    pub video_id: String,
    pub channel: Channel,
    pub title: String,
    pub description: String,
    pub tags: Vec<String>,
    pub published_at: DateTime<Utc>,
}

impl Video {
    /// True when any of `terms` occurs case-insensitively in the title,
    /// description or one of the tags.
    pub fn mentions_any(&self, terms: &[String]) -> bool {
        let title = self.title.to_lowercase();
        let description = self.description.to_lowercase();
        let tags: Vec<String> = self.tags.iter().map(|t| t.to_lowercase()).collect();
        terms.iter().map(|t| t.to_lowercase()).any(|term| {
            !term.is_empty()
                && (title.contains(&term)
                    || description.contains(&term)
                    || tags.iter().any(|t| t.contains(&term)))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub video_id: String,
    pub channel: Channel,
    /// Salted hash of the platform author field, never the raw name.
    pub author_key: String,
    pub text: String,
    pub published_at: DateTime<Utc>,
    pub is_reply: bool,
    #[serde(default)]
    pub parent_id: Option<String>,
}

/// Inclusive range of UTC calendar dates under analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl AnalysisWindow {
    pub fn new(start_date: NaiveDate, end_date: NaiveDate) -> Result<Self, CorpusError> {
        let window = AnalysisWindow {
            start_date,
            end_date,
        };
        window.validate()?;
        Ok(window)
    }

    /// The pre-election week used throughout the examples: 2024-10-29 to 2024-11-05.
    pub fn election_week_2024() -> Self {
        AnalysisWindow {
            start_date: NaiveDate::from_ymd_opt(2024, 10, 29).expect("valid date"),
            end_date: NaiveDate::from_ymd_opt(2024, 11, 5).expect("valid date"),
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.start_date > self.end_date {
            return Err(CorpusError::InvalidWindow {
                start: self.start_date,
                end: self.end_date,
            });
        }
        Ok(())
    }

    pub fn contains(&self, ts: &DateTime<Utc>) -> bool {
        let date = ts.date_naive();
        date >= self.start_date && date <= self.end_date
    }

    /// Number of calendar days covered (end inclusive).
    pub fn num_days(&self) -> u32 {
        (self.end_date - self.start_date).num_days() as u32 + 1
    }
}

/// Whole-calendar-day offset from the window start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DayIndex(pub u32);

impl fmt::Display for DayIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// UTC calendar-day offset of `ts` from `window.start_date`.
pub fn day_index(ts: &DateTime<Utc>, window: &AnalysisWindow) -> Result<DayIndex, CorpusError> {
    if !window.contains(ts) {
        return Err(CorpusError::OutOfWindow {
            timestamp: *ts,
            window: *window,
        });
    }
    let offset = (ts.date_naive() - window.start_date).num_days();
    Ok(DayIndex(offset as u32))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub videos: Vec<Video>,
    pub comments: Vec<Comment>,
    pub window: AnalysisWindow,
}

impl Corpus {
    pub fn new(videos: Vec<Video>, comments: Vec<Comment>, window: AnalysisWindow) -> Self {
        Corpus {
            videos,
            comments,
            window,
        }
    }

    /// Checks the structural invariants. Errors carry the index of the
    /// offending record within `videos` or `comments`.
    pub fn validate(&self) -> Result<(), CorpusError> {
        self.window.validate()?;
        let mut video_ids = HashSet::new();
        for (i, v) in self.videos.iter().enumerate() {
            if v.video_id.is_empty() {
                return Err(CorpusError::invalid(format!("video {i}: empty video_id")));
            }
            if !video_ids.insert(v.video_id.as_str()) {
                return Err(CorpusError::invalid(format!(
                    "video {i}: duplicate video_id {}",
                    v.video_id
                )));
            }
        }
        let mut comment_ids = HashSet::new();
        for (i, c) in self.comments.iter().enumerate() {
            if c.comment_id.is_empty() {
                return Err(CorpusError::invalid(format!("comment {i}: empty comment_id")));
            }
            if !comment_ids.insert(c.comment_id.as_str()) {
                return Err(CorpusError::invalid(format!(
                    "comment {i}: duplicate comment_id {}",
                    c.comment_id
                )));
            }
            if !video_ids.contains(c.video_id.as_str()) {
                return Err(CorpusError::invalid(format!(
                    "comment {i}: unknown video_id {}",
                    c.video_id
                )));
            }
            if c.is_reply != c.parent_id.is_some() {
                return Err(CorpusError::invalid(format!(
                    "comment {i}: is_reply={} disagrees with parent_id",
                    c.is_reply
                )));
            }
        }
        Ok(())
    }

    pub fn in_window(&self, comment: &Comment) -> bool {
        self.window.contains(&comment.published_at)
    }

    /// Comments inside the analysis window, in stored order.
    pub fn analyzed_comments(&self) -> impl Iterator<Item = &Comment> {
        self.comments.iter().filter(|c| self.in_window(c))
    }

    pub fn out_of_window_count(&self) -> usize {
        self.comments.iter().filter(|c| !self.in_window(c)).count()
    }

    pub fn top_level_count(&self) -> usize {
        self.comments.iter().filter(|c| !c.is_reply).count()
    }

    pub fn reply_count(&self) -> usize {
        self.comments.iter().filter(|c| c.is_reply).count()
    }
}
