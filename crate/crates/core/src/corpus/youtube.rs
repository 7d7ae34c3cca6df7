//! YouTube Data API v3 ingestion: `search.list` + `videos.list` for video
//! discovery, `commentThreads.list` + `comments.list` for comments.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{AnalysisWindow, Channel, Comment, Video};
use crate::http::{HttpResponse, HttpTransport, Request, TransportError};

pub const LIVE_BASE_URL: &str = "https://www.googleapis.com";

const SEARCH_PATH: &str = "/youtube/v3/search";
const VIDEOS_PATH: &str = "/youtube/v3/videos";
const THREADS_PATH: &str = "/youtube/v3/commentThreads";
const COMMENTS_PATH: &str = "/youtube/v3/comments";

/// The eighteen election keywords used for video discovery.
pub const ELECTION_QUERY_TERMS: [&str; 18] = [
    "Donald Trump",
    "Kamala Harris",
    "Joe Biden",
    "Tim Walz",
    "Robert F. Kennedy Jr",
    "RFK Jr",
    "JD Vance",
    "Democrats",
    "Democratic Party",
    "Republicans",
    "Republican Party",
    "DNC",
    "RNC",
    "Democratic National Convention",
    "Republican National Convention",
    "Election",
    "Presidential Election 2024",
    "2024 Election",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport error: {0}")]
    Transport(#[from] TransportError),
    #[error("credentials rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("quota exceeded (HTTP {status}): {message}")]
    Quota { status: u16, message: String },
    #[error("comments are disabled for video {video_id}")]
    CommentsDisabled { video_id: String },
    #[error("unexpected response body for {what}: {message}")]
    Decode { what: String, message: String },
    #[error("invalid search config: {0}")]
    Config(String),
}

/// A configured channel: display identifier plus the platform channel id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSource {
    pub channel: Channel,
    pub channel_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub channels: Vec<ChannelSource>,
    pub query_terms: Vec<String>,
    pub window: AnalysisWindow,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_key_env() -> String {
    "YOUTUBE_API_KEY".to_string()
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.channels.is_empty() {
            return Err(IngestError::Config("channels must be non-empty".into()));
        }
        if self.query_terms.is_empty() {
            return Err(IngestError::Config("query_terms must be non-empty".into()));
        }
        self.window
            .validate()
            .map_err(|e| IngestError::Config(e.to_string()))
    }
}

/// API client bound to a transport, an optional key and the author salt.
pub struct YouTubeClient<T> {
    transport: T,
    api_key: Option<String>,
    author_salt: String,
}

impl<T: HttpTransport> YouTubeClient<T> {
    pub fn new(transport: T, api_key: Option<String>, author_salt: impl Into<String>) -> Self {
        YouTubeClient {
            transport,
            api_key,
            author_salt: author_salt.into(),
        }
    }

    fn call(&self, mut request: Request, what: &str) -> Result<Value, IngestError> {
        if let Some(key) = &self.api_key {
            request = request.param("key", key.clone());
        }
        let response = self.transport.send(&request)?;
        check_status(&response, what)?;
        serde_json::from_str(&response.body).map_err(|e| IngestError::Decode {
            what: what.to_string(),
            message: e.to_string(),
        })
    }

    /// Finds in-window videos on the configured channels whose title,
    /// description or tags mention at least one query term. The keyword
    /// filter is re-applied client-side because API relevance search is
    /// not exact.
    pub fn search_videos(&self, config: &SearchConfig) -> Result<Vec<Video>, IngestError> {
        config.validate()?;
        let mut videos = BTreeMap::new();
        for source in &config.channels {
            let mut ids = Vec::new();
            let mut page: Option<String> = None;
            loop {
                let request = requests::search(config, source, page.as_deref());
                let body = self.call(request, "search.list")?;
                for item in items(&body) {
                    if let Some(id) = item.pointer("/id/videoId").and_then(Value::as_str) {
                        ids.push(id.to_string());
                    }
                }
                page = next_page(&body);
                if page.is_none() {
                    break;
                }
            }
            ids.sort();
            ids.dedup();
            for chunk in ids.chunks(50) {
                let chunk: Vec<&str> = chunk.iter().map(String::as_str).collect();
                let request = requests::videos(&chunk);
                let body = self.call(request, "videos.list")?;
                for item in items(&body) {
                    let video = parse_video(item, &source.channel)?;
                    if config.window.contains(&video.published_at)
                        && video.mentions_any(&config.query_terms)
                    {
                        videos.insert(video.video_id.clone(), video);
                    }
                }
            }
        }
        let mut out: Vec<Video> = videos.into_values().collect();
        out.sort_by(|a, b| {
            (a.published_at, &a.video_id).cmp(&(b.published_at, &b.video_id))
        });
        Ok(out)
    }

    /// All top-level comments and replies of one video, across every page.
    pub fn fetch_comments(&self, video: &Video) -> Result<Vec<Comment>, IngestError> {
        let mut out = Vec::new();
        let mut page: Option<String> = None;
        loop {
            let request = requests::comment_threads(&video.video_id, page.as_deref());
            let body = match self.call(request, "commentThreads.list") {
                Err(IngestError::Transport(TransportError::Status { status: 403, message }))
                    if message.contains("commentsDisabled") =>
                {
                    return Err(IngestError::CommentsDisabled {
                        video_id: video.video_id.clone(),
                    })
                }
                other => other?,
            };
            for thread in items(&body) {
                let top = thread
                    .pointer("/snippet/topLevelComment")
                    .ok_or_else(|| decode("commentThreads.list", "missing topLevelComment"))?;
                let top_comment = self.parse_comment(top, video, None)?;
                let thread_id = top_comment.comment_id.clone();
                out.push(top_comment);

                let total_replies = thread
                    .pointer("/snippet/totalReplyCount")
                    .and_then(Value::as_u64)
                    .unwrap_or(0) as usize;
                let inline: Vec<&Value> = thread
                    .pointer("/replies/comments")
                    .and_then(Value::as_array)
                    .map(|a| a.iter().collect())
                    .unwrap_or_default();
                if total_replies > inline.len() {
                    out.extend(self.fetch_replies(&thread_id, video)?);
                } else {
                    for reply in inline {
                        out.push(self.parse_comment(reply, video, Some(&thread_id))?);
                    }
                }
            }
            page = next_page(&body);
            if page.is_none() {
                break;
            }
        }
        Ok(out)
    }

    fn fetch_replies(&self, parent_id: &str, video: &Video) -> Result<Vec<Comment>, IngestError> {
        let mut out = Vec::new();
        let mut page: Option<String> = None;
        loop {
            let request = requests::replies(parent_id, page.as_deref());
            let body = self.call(request, "comments.list")?;
            for item in items(&body) {
                out.push(self.parse_comment(item, video, Some(parent_id))?);
            }
            page = next_page(&body);
            if page.is_none() {
                break;
            }
        }
        Ok(out)
    }

    fn parse_comment(
        &self,
        item: &Value,
        video: &Video,
        parent: Option<&str>,
    ) -> Result<Comment, IngestError> {
        const WHAT: &str = "comment";
        let id = item
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| decode(WHAT, "missing id"))?;
        let snippet = item.get("snippet").ok_or_else(|| decode(WHAT, "missing snippet"))?;
        let text = snippet
            .get("textOriginal")
            .or_else(|| snippet.get("textDisplay"))
            .and_then(Value::as_str)
            .unwrap_or_default();
        let author = snippet
            .pointer("/authorChannelId/value")
            .or_else(|| snippet.get("authorDisplayName"))
            .and_then(Value::as_str)
            .unwrap_or_default();
        let published_at = parse_ts(snippet.get("publishedAt"), WHAT)?;
        let parent_id = parent.map(str::to_string).or_else(|| {
            snippet
                .get("parentId")
                .and_then(Value::as_str)
                .map(str::to_string)
        });
        Ok(Comment {
            comment_id: id.to_string(),
            video_id: video.video_id.clone(),
            channel: video.channel.clone(),
            author_key: hash_author(&self.author_salt, author),
            text: text.to_string(),
            published_at,
            is_reply: parent_id.is_some(),
            parent_id,
        })
    }
}

/// Salted, truncated SHA-256 of the author field.
pub fn hash_author(salt: &str, author: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(salt.as_bytes());
    hasher.update([0u8]);
    hasher.update(author.as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

fn check_status(response: &HttpResponse, what: &str) -> Result<(), IngestError> {
    if response.is_success() {
        return Ok(());
    }
    let body: Value = serde_json::from_str(&response.body).unwrap_or(Value::Null);
    let reason = body
        .pointer("/error/errors/0/reason")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let message = body
        .pointer("/error/message")
        .and_then(Value::as_str)
        .unwrap_or(what)
        .to_string();
    let status = response.status;
    match reason.as_str() {
        "quotaExceeded" | "rateLimitExceeded" | "userRateLimitExceeded" | "dailyLimitExceeded" => {
            Err(IngestError::Quota { status, message })
        }
        "keyInvalid" | "keyExpired" | "authError" | "unauthorized" => {
            Err(IngestError::Auth { status, message })
        }
        _ if status == 401 => Err(IngestError::Auth { status, message }),
        _ if status == 429 => Err(IngestError::Quota { status, message }),
        _ => Err(IngestError::Transport(TransportError::Status {
            status,
            message: if reason.is_empty() {
                message
            } else {
                format!("{reason}: {message}")
            },
        })),
    }
}

fn items(body: &Value) -> impl Iterator<Item = &Value> {
    body.get("items")
        .and_then(Value::as_array)
        .into_iter()
        .flatten()
}

fn next_page(body: &Value) -> Option<String> {
    body.get("nextPageToken")
        .and_then(Value::as_str)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
}

fn decode(what: &str, message: &str) -> IngestError {
    IngestError::Decode {
        what: what.to_string(),
        message: message.to_string(),
    }
}

fn parse_ts(value: Option<&Value>, what: &str) -> Result<DateTime<Utc>, IngestError> {
    let raw = value
        .and_then(Value::as_str)
        .ok_or_else(|| decode(what, "missing publishedAt"))?;
    DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| decode(what, &format!("bad publishedAt {raw:?}: {e}")))
}

fn parse_video(item: &Value, channel: &Channel) -> Result<Video, IngestError> {
    const WHAT: &str = "videos.list";
    let id = item
        .get("id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| decode(WHAT, "missing id"))?;
    let snippet = item.get("snippet").ok_or_else(|| decode(WHAT, "missing snippet"))?;
    let text = |k: &str| {
        snippet
            .get(k)
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string()
    };
    let tags = snippet
        .get("tags")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    Ok(Video {
        video_id: id.to_string(),
        channel: channel.clone(),
        title: text("title"),
        description: text("description"),
        tags,
        published_at: parse_ts(snippet.get("publishedAt"), WHAT)?,
    })
}

/// Request builders exposed so fixture sets can be recorded or synthesized
/// with exactly the keys the client will look up.
pub mod requests {
    use super::*;

    pub fn search(config: &SearchConfig, source: &ChannelSource, page: Option<&str>) -> Request {
        let after = format!("{}T00:00:00Z", config.window.start_date);
        let before = format!(
            "{}T00:00:00Z",
            config.window.end_date.succ_opt().unwrap_or(config.window.end_date)
        );
        let mut r = Request::get(SEARCH_PATH)
            .param("part", "snippet")
            .param("channelId", source.channel_id.clone())
            .param("q", config.query_terms.join("|"))
            .param("type", "video")
            .param("order", "date")
            .param("maxResults", "50")
            .param("publishedAfter", after)
            .param("publishedBefore", before);
        if let Some(p) = page {
            r = r.param("pageToken", p);
        }
        r
    }

    pub fn videos(ids: &[&str]) -> Request {
        let mut ids: Vec<&str> = ids.to_vec();
        ids.sort();
        Request::get(VIDEOS_PATH)
            .param("part", "snippet")
            .param("id", ids.join(","))
    }

    pub fn comment_threads(video_id: &str, page: Option<&str>) -> Request {
        let mut r = Request::get(THREADS_PATH)
            .param("part", "snippet,replies")
            .param("videoId", video_id)
            .param("maxResults", "100")
            .param("textFormat", "plainText");
        if let Some(p) = page {
            r = r.param("pageToken", p);
        }
        r
    }

    pub fn replies(parent_id: &str, page: Option<&str>) -> Request {
        let mut r = Request::get(COMMENTS_PATH)
            .param("part", "snippet")
            .param("parentId", parent_id)
            .param("maxResults", "100")
            .param("textFormat", "plainText");
        if let Some(p) = page {
            r = r.param("pageToken", p);
        }
        r
    }
}
