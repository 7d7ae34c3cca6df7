//! Videos and comments: ingestion, de-duplication, day bucketing and the
//! JSONL corpus file.

mod types;
pub mod youtube;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use types::{
    day_index, AnalysisWindow, Channel, Comment, Corpus, DayIndex, Video,
};
pub use youtube::{
    hash_author, ChannelSource, IngestError, SearchConfig, YouTubeClient, ELECTION_QUERY_TERMS,
    LIVE_BASE_URL,
};

use crate::http::HttpTransport;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("timestamp {timestamp} is outside the analysis window {}..={}", window.start_date, window.end_date)]
    OutOfWindow {
        timestamp: DateTime<Utc>,
        window: AnalysisWindow,
    },
    #[error("invalid window: start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("invalid corpus: {0}")]
    Invalid(String),
}

impl CorpusError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CorpusError::Invalid(msg.into())
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Removes duplicate comments.
///
/// Output is sorted by `(published_at, comment_id)`. A record is dropped
/// when any earlier record, kept or not, has the same `comment_id` or the
/// same `(video_id, author_key, text)` triple.
pub fn dedupe(mut comments: Vec<Comment>) -> Vec<Comment> {
    comments.sort_by(|a, b| {
        (a.published_at, &a.comment_id).cmp(&(b.published_at, &b.comment_id))
    });
    let mut seen_ids = HashSet::new();
    let mut seen_content = HashSet::new();
    comments
        .into_iter()
        .filter(|c| {
            let new_id = seen_ids.insert(c.comment_id.clone());
            let new_content = seen_content.insert((c.video_id.clone(), c.author_key.clone(), c.text.clone()));
            new_id && new_content
        })
        .collect()
}

/// Fetches comments for every video, `workers` videos at a time. Videos with
/// comments disabled are skipped with a warning. The merged result is
/// keyed by `comment_id` and sorted, so completion order is unobservable.
pub fn fetch_all_comments<T: HttpTransport>(
    client: &YouTubeClient<T>,
    videos: &[Video],
    workers: usize,
) -> Result<Vec<Comment>, IngestError> {
    let workers = workers.max(1);
    let mut results: Vec<Result<Vec<Comment>, IngestError>> = Vec::with_capacity(videos.len());
    for batch in videos.chunks(workers) {
        let batch_results: Vec<_> = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|v| scope.spawn(move || client.fetch_comments(v)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("comment fetch worker panicked"))
                .collect()
        });
        results.extend(batch_results);
    }
    let mut merged = BTreeMap::new();
    for result in results {
        match result {
            Ok(comments) => {
                for c in comments {
                    merged.entry(c.comment_id.clone()).or_insert(c);
                }
            }
            Err(IngestError::CommentsDisabled { video_id }) => {
                log::warn!("skipping video {video_id}: comments disabled");
            }
            Err(e) => return Err(e),
        }
    }
    let mut out: Vec<Comment> = merged.into_values().collect();
    out.sort_by(|a, b| {
        (a.published_at, &a.comment_id).cmp(&(b.published_at, &b.comment_id))
    });
    Ok(out)
}

/// Runs video search and comment collection, returning an un-deduplicated corpus.
pub fn ingest<T: HttpTransport>(
    client: &YouTubeClient<T>,
    config: &SearchConfig,
    workers: usize,
) -> Result<Corpus, IngestError> {
    let videos = client.search_videos(config)?;
    let comments = fetch_all_comments(client, &videos, workers)?;
    Ok(Corpus::new(videos, comments, config.window))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Window(AnalysisWindow),
    Video(Video),
    Comment(Comment),
}

/// Writes the corpus as JSONL: a window record, then videos, then comments.
pub fn store_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = |record: &Record| -> std::io::Result<()> {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")
    };
    let io = |e| CorpusError::io(path, e);
    write(&Record::Window(corpus.window)).map_err(io)?;
    for v in &corpus.videos {
        write(&Record::Video(v.clone())).map_err(io)?;
    }
    for c in &corpus.comments {
        write(&Record::Comment(c.clone())).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a JSONL corpus. Schema violations report the 1-based line number.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    parse_corpus(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut window = None;
    let mut videos = Vec::new();
    let mut comments = Vec::new();
    let mut video_lines = BTreeMap::new();
    let mut comment_ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        let schema = |message: String| CorpusError::Schema {
            line: line_no,
            message,
        };
        match record {
            Record::Window(w) => {
                if window.is_some() {
                    return Err(schema("duplicate window record".into()));
                }
                w.validate().map_err(|e| schema(e.to_string()))?;
                window = Some(w);
            }
            Record::Video(v) => {
                if v.video_id.is_empty() {
                    return Err(schema("empty video_id".into()));
                }
                if video_lines.insert(v.video_id.clone(), line_no).is_some() {
                    return Err(schema(format!("duplicate video_id {}", v.video_id)));
                }
                videos.push(v);
            }
            Record::Comment(c) => {
                if c.comment_id.is_empty() {
                    return Err(schema("empty comment_id".into()));
                }
                if !comment_ids.insert(c.comment_id.clone()) {
                    return Err(schema(format!("duplicate comment_id {}", c.comment_id)));
                }
                if c.is_reply != c.parent_id.is_some() {
                    return Err(schema("is_reply must be true iff parent_id is present".into()));
                }
                comments.push((line_no, c));
            }
        }
    }
    let window = window.ok_or_else(|| CorpusError::Schema {
        line: 0,
        message: "missing window record".into(),
    })?;
    for (line, c) in &comments {
        if !video_lines.contains_key(&c.video_id) {
            return Err(CorpusError::Schema {
                line: *line,
                message: format!("comment references unknown video_id {}", c.video_id),
            });
        }
    }
    Ok(Corpus::new(
        videos,
        comments.into_iter().map(|(_, c)| c).collect(),
        window,
    ))
}
