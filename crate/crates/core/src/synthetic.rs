//! Seeded synthetic data with known ground truth.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use std::path::Path;

use crate::corpus::{AnalysisWindow, Channel, ChannelSource, Comment, Corpus, SearchConfig, Video};
use crate::keywords::{KeywordSpec, TaxonomyFile, DEFAULT_TAXONOMY_JSON};

/// Isotropic Gaussian blobs: `n_per` points around each center with standard
/// deviation `sigma`. Returns points and the generating blob index.
pub fn gaussian_blobs(
    centers: &[Vec<f64>],
    n_per: usize,
    sigma: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(centers.len() * n_per);
    let mut labels = Vec::with_capacity(centers.len() * n_per);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per {
            points.push(
                center
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + sigma * z
                    })
                    .collect(),
            );
            labels.push(c);
        }
    }
    (points, labels)
}

/// Two unit-variance blobs in `dim` dimensions whose centers are
/// `separation` apart along the first axis.
pub fn two_blobs(n_per: usize, dim: usize, separation: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut far = vec![0.0; dim];
    far[0] = separation;
    gaussian_blobs(&[vec![0.0; dim], far], n_per, 1.0, seed)
}

/// Deterministic shuffle permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Filler vocabulary for synthetic comments; none of it overlaps a taxonomy keyword.
pub const FILLER_WORDS: &[&str] = &[
    "really", "think", "people", "today", "video", "news", "watch", "thing", "country", "agree",
    "honestly", "believe", "talk", "story", "report", "truly", "seems", "channel", "point", "week",
];

/// Random filler sentence of `len` words.
pub fn filler_sentence(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| *FILLER_WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Vocabulary for off-topic chatter; disjoint from every taxonomy keyword.
pub const CHATTER_WORDS: &[&str] = &[
    "football", "pizza", "weather", "music", "movie", "recipe", "coffee", "garden", "puppies",
    "concert", "baseball", "vacation",
];

/// Plain keyword phrases of each default taxonomy issue, in taxonomy order.
/// Co-occurrence rules and phrases containing digits are left out.
pub fn issue_phrases() -> Vec<(String, Vec<String>)> {
    let file: TaxonomyFile = serde_json::from_str(DEFAULT_TAXONOMY_JSON).expect("shipped taxonomy parses");
    file.issues
        .into_iter()
        .map(|issue| {
            let phrases = issue
                .keywords
                .into_iter()
                .filter_map(|k| match k {
                    KeywordSpec::Text(t) if !t.chars().any(|c| c.is_numeric()) => Some(t.to_lowercase()),
                    _ => None,
                })
                .collect();
            (issue.name, phrases)
        })
        .collect()
}

/// A generated comment with the issue it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueSentence {
    pub issue: usize,
    pub text: String,
}

/// Two distinct keyword phrases of one issue separated by filler words.
pub fn issue_sentence(rng: &mut impl Rng, phrases: &[String]) -> String {
    let picked: Vec<&String> = phrases.choose_multiple(rng, 2).collect();
    format!(
        "{} {} {} {}",
        picked[0],
        filler_sentence(rng, 1),
        picked[picked.len() - 1],
        filler_sentence(rng, 1)
    )
}

/// `per_issue` sentences for every default issue, grouped by issue.
pub fn keyword_sentences(per_issue: usize, seed: u64) -> Vec<IssueSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_issue * 5);
    for (issue, (_, phrases)) in issue_phrases().iter().enumerate() {
        for _ in 0..per_issue {
            out.push(IssueSentence {
                issue,
                text: issue_sentence(&mut rng, phrases),
            });
        }
    }
    out
}

/// Chatter sentence built only from [`CHATTER_WORDS`] and filler.
pub fn chatter_sentence(rng: &mut impl Rng) -> String {
    let picked: Vec<&&str> = CHATTER_WORDS.choose_multiple(rng, 2).collect();
    format!("{} {} {} {}", picked[0], filler_sentence(rng, 1), picked[1], filler_sentence(rng, 1))
}

/// Texts that normalize to no tokens.
pub const DEGENERATE_TEXTS: &[&str] = &[
    "", "!!!", "123", "?? 2024 ??", "the and of", "...", "42 47", "is it", "to be or not to be", "#$%",
];

/// Record counts of the bundled fixture corpus, fixed by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureCounts {
    pub videos: usize,
    pub raw: usize,
    pub duplicates: usize,
    pub deduped: usize,
    pub out_of_window: usize,
    pub in_window: usize,
    pub degenerate: usize,
    pub embeddable: usize,
    /// In-window topical comments per issue, in taxonomy order.
    pub topical: [usize; 5],
    pub chatter: usize,
}

pub const FIXTURE_COUNTS: FixtureCounts = FixtureCounts {
    videos: 4,
    raw: 500,
    duplicates: 80,
    deduped: 420,
    out_of_window: 40,
    in_window: 380,
    degenerate: 20,
    embeddable: 360,
    topical: [80, 40, 60, 70, 50],
    chatter: 60,
};

pub const FIXTURE_SEED: u64 = 20241105;

fn fixture_time(rng: &mut impl Rng, window: &AnalysisWindow, in_window: bool) -> DateTime<Utc> {
    let start = Utc
        .from_utc_datetime(&window.start_date.and_hms_opt(0, 0, 0).expect("midnight"));
    let day = if in_window {
        rng.gen_range(0..window.num_days() as i64)
    } else if rng.gen_bool(0.5) {
        -rng.gen_range(1..=9)
    } else {
        window.num_days() as i64 + rng.gen_range(0..5)
    };
    start + Duration::days(day) + Duration::seconds(rng.gen_range(0..86_400))
}

/// The bundled 500-record corpus: two channels, four videos, topical
/// comments for every issue, off-topic chatter, text-free comments,
/// out-of-window comments, replies and reposted duplicates.
pub fn fixture_corpus(seed: u64) -> Corpus {
    let window = AnalysisWindow::election_week_2024();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let video_start = Utc.with_ymd_and_hms(2024, 10, 28, 15, 0, 0).unwrap();
    let videos: Vec<Video> = [("nyt-1", "NYT"), ("nyt-2", "NYT"), ("wsj-1", "WSJ"), ("wsj-2", "WSJ")]
        .iter()
        .enumerate()
        .map(|(i, (id, ch))| Video {
            video_id: id.to_string(),
            channel: Channel::new(*ch),
            title: format!("Election week coverage part {}", i + 1),
            description: "Donald Trump and Kamala Harris in the final week".into(),
            tags: vec!["election".into(), "Trump".into(), "Harris".into()],
            published_at: video_start + Duration::hours(6 * i as i64),
        })
        .collect();

    let phrases = issue_phrases();
    let mut texts: Vec<(String, bool)> = Vec::new();
    for (issue, &n) in FIXTURE_COUNTS.topical.iter().enumerate() {
        for _ in 0..n {
            texts.push((issue_sentence(&mut rng, &phrases[issue].1), true));
        }
    }
    for _ in 0..FIXTURE_COUNTS.chatter {
        texts.push((chatter_sentence(&mut rng), true));
    }
    for i in 0..FIXTURE_COUNTS.degenerate {
        texts.push((DEGENERATE_TEXTS[i % DEGENERATE_TEXTS.len()].to_string(), true));
    }
    for i in 0..FIXTURE_COUNTS.out_of_window {
        let (_, p) = &phrases[i % phrases.len()];
        texts.push((issue_sentence(&mut rng, p), false));
    }
    texts.shuffle(&mut rng);

    let mut comments: Vec<Comment> = Vec::with_capacity(FIXTURE_COUNTS.raw);
    let mut last_top: Vec<Option<String>> = vec![None; videos.len()];
    for (i, (text, in_window)) in texts.into_iter().enumerate() {
        let v = rng.gen_range(0..videos.len());
        let parent_id = if i % 5 == 4 { last_top[v].clone() } else { None };
        let comment_id = format!("fx{i:04}");
        if parent_id.is_none() {
            last_top[v] = Some(comment_id.clone());
        }
        comments.push(Comment {
            comment_id,
            video_id: videos[v].video_id.clone(),
            channel: videos[v].channel.clone(),
            author_key: format!("author{i:04}"),
            text,
            published_at: fixture_time(&mut rng, &window, in_window),
            is_reply: parent_id.is_some(),
            parent_id,
        });
    }
    let originals = comments.len();
    for d in 0..FIXTURE_COUNTS.duplicates {
        let src = comments[rng.gen_range(0..originals)].clone();
        comments.push(Comment {
            comment_id: format!("fxdup{d:03}"),
            published_at: src.published_at + Duration::minutes(rng.gen_range(1..120)),
            ..src
        });
    }
    Corpus::new(videos, comments, window)
}

/// Shape of the recorded API fixture written by [`write_api_fixture`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApiFixtureCounts {
    /// Videos returned by search across both result pages.
    pub searched: usize,
    /// Videos surviving the window and keyword filters.
    pub videos: usize,
    pub top_level: usize,
    pub replies: usize,
    /// Replies only reachable through `comments.list`.
    pub paged_replies: usize,
    /// Top-level comments posted after the window.
    pub out_of_window: usize,
}

pub const API_FIXTURE_SEED: u64 = 210;

pub const API_FIXTURE_COUNTS: ApiFixtureCounts = ApiFixtureCounts {
    searched: 3,
    videos: 1,
    top_level: 200,
    replies: 10,
    paged_replies: 6,
    out_of_window: 5,
};

/// Search settings the recorded API fixture answers.
pub fn api_fixture_search() -> SearchConfig {
    SearchConfig {
        channels: vec![ChannelSource {
            channel: Channel::new("NYT"),
            channel_id: "UCqnbDFdCpuN8CMEg0VuEBqA".into(),
        }],
        query_terms: crate::corpus::ELECTION_QUERY_TERMS.iter().map(|s| s.to_string()).collect(),
        window: AnalysisWindow::election_week_2024(),
        api_key_env: "YOUTUBE_API_KEY".into(),
    }
}

fn api_comment(id: &str, text: &str, author: &str, at: DateTime<Utc>, parent: Option<&str>) -> serde_json::Value {
    let mut snippet = serde_json::json!({
        "textOriginal": text,
        "authorChannelId": {"value": author},
        "publishedAt": at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    });
    if let Some(p) = parent {
        snippet["parentId"] = p.into();
    }
    serde_json::json!({"id": id, "snippet": snippet})
}

/// Writes recorded responses for one channel: a two-page search returning
/// three videos (one in window and on topic, one off topic, one before the
/// window) and 200 top-level comments over two pages of 100 on the kept
/// video. Thread `t0000` carries four inline replies; thread `t0001`
/// reports six replies but inlines two, forcing a `comments.list` call.
pub fn write_api_fixture(dir: &Path, seed: u64) -> std::io::Result<ApiFixtureCounts> {
    use crate::corpus::youtube::requests;
    use crate::http::write_fixture;
    use serde_json::json;

    let cfg = api_fixture_search();
    let source = &cfg.channels[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = |v: serde_json::Value| v.to_string();

    write_fixture(
        dir,
        &requests::search(&cfg, source, None),
        &body(json!({"items": [{"id": {"videoId": "vid-keep"}}, {"id": {"videoId": "vid-cooking"}}], "nextPageToken": "S2"})),
    )?;
    write_fixture(
        dir,
        &requests::search(&cfg, source, Some("S2")),
        &body(json!({"items": [{"id": {"videoId": "vid-early"}}]})),
    )?;
    let video = |id: &str, title: &str, at: &str| {
        json!({"id": id, "snippet": {"title": title, "description": "", "tags": [], "publishedAt": at}})
    };
    write_fixture(
        dir,
        &requests::videos(&["vid-cooking", "vid-early", "vid-keep"]),
        &body(json!({"items": [
            video("vid-keep", "Donald Trump and Kamala Harris make final pitches", "2024-10-30T12:00:00Z"),
            video("vid-cooking", "Five weeknight pasta recipes", "2024-10-31T12:00:00Z"),
            video("vid-early", "Election countdown begins", "2024-10-20T12:00:00Z"),
        ]})),
    )?;

    let start = Utc.with_ymd_and_hms(2024, 10, 30, 13, 0, 0).unwrap();
    let late = Utc.with_ymd_and_hms(2024, 11, 7, 9, 0, 0).unwrap();
    let phrases = issue_phrases();
    let mut threads = Vec::new();
    for i in 0..API_FIXTURE_COUNTS.top_level {
        let id = format!("t{i:04}");
        let at = if i >= API_FIXTURE_COUNTS.top_level - API_FIXTURE_COUNTS.out_of_window {
            late + Duration::minutes(i as i64)
        } else {
            start + Duration::minutes(17 * i as i64)
        };
        let text = issue_sentence(&mut rng, &phrases[i % phrases.len()].1);
        let top = api_comment(&id, &text, &format!("UCauthor{i:03}"), at, None);
        let reply = |j: usize| {
            api_comment(
                &format!("{id}.r{j}"),
                &filler_sentence(&mut ChaCha8Rng::seed_from_u64(seed ^ (i * 16 + j) as u64), 6),
                &format!("UCreplier{j}"),
                at + Duration::minutes(5 + j as i64),
                Some(&id),
            )
        };
        let inline_n = API_FIXTURE_COUNTS.replies - API_FIXTURE_COUNTS.paged_replies;
        let thread = match i {
            0 => json!({"snippet": {"topLevelComment": top, "totalReplyCount": inline_n},
                        "replies": {"comments": (0..inline_n).map(reply).collect::<Vec<_>>()}}),
            1 => {
                let all: Vec<_> = (0..API_FIXTURE_COUNTS.paged_replies).map(reply).collect();
                write_fixture(
                    dir,
                    &requests::replies(&id, None),
                    &body(json!({"items": all[..4], "nextPageToken": "R2"})),
                )?;
                write_fixture(dir, &requests::replies(&id, Some("R2")), &body(json!({"items": all[4..]})))?;
                json!({"snippet": {"topLevelComment": top, "totalReplyCount": all.len()},
                       "replies": {"comments": all[..2]}})
            }
            _ => json!({"snippet": {"topLevelComment": top, "totalReplyCount": 0}}),
        };
        threads.push(thread);
    }
    write_fixture(
        dir,
        &requests::comment_threads("vid-keep", None),
        &body(json!({"items": threads[..100], "nextPageToken": "C2"})),
    )?;
    write_fixture(
        dir,
        &requests::comment_threads("vid-keep", Some("C2")),
        &body(json!({"items": threads[100..]})),
    )?;
    Ok(API_FIXTURE_COUNTS)
}
