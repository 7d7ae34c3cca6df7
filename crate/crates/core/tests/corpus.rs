use std::collections::HashSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use salience::corpus::youtube::requests;
use salience::corpus::{
    day_index, dedupe, fetch_all_comments, ingest, load_corpus, parse_corpus, store_corpus, AnalysisWindow, Channel,
    Comment, Corpus, CorpusError, DayIndex, IngestError, Video, YouTubeClient,
};
use salience::http::{write_fixture, FixtureTransport};
use salience::synthetic::{api_fixture_search, write_api_fixture, API_FIXTURE_SEED};
use salience::textprep::{group_concat, normalize, StopwordSet};

fn ts(s: &str) -> DateTime<Utc> {
    s.parse().unwrap()
}

fn comment(id: &str, author: &str, text: &str, at: DateTime<Utc>) -> Comment {
    Comment {
        comment_id: id.into(),
        video_id: "v".into(),
        channel: Channel::new("NYT"),
        author_key: author.into(),
        text: text.into(),
        published_at: at,
        is_reply: false,
        parent_id: None,
    }
}

/// Keeps a record iff no record that sorts before it shares its id or its
/// (video, author, text) triple.
fn pairwise_dedupe(mut input: Vec<Comment>) -> Vec<Comment> {
    input.sort_by(|a, b| (a.published_at, &a.comment_id).cmp(&(b.published_at, &b.comment_id)));
    (0..input.len())
        .filter(|&i| {
            (0..i).all(|j| {
                let (a, b) = (&input[i], &input[j]);
                a.comment_id != b.comment_id
                    && (a.video_id.as_str(), a.author_key.as_str(), a.text.as_str())
                        != (b.video_id.as_str(), b.author_key.as_str(), b.text.as_str())
            })
        })
        .map(|i| input[i].clone())
        .collect()
}

#[test]
fn repost_keeps_earliest_instance() {
    let early = comment("b", "u1", "same words", ts("2024-10-30T10:00:00Z"));
    let late = comment("a", "u1", "same words", ts("2024-10-30T11:00:00Z"));
    let out = dedupe(vec![late.clone(), early.clone()]);
    assert_eq!(out, vec![early.clone()]);
    assert_eq!(out, pairwise_dedupe(vec![late, early]));
}

#[test]
fn chained_duplicates_follow_the_pairwise_rule() {
    let t0 = ts("2024-10-30T10:00:00Z");
    let a = comment("x", "u1", "one", t0);
    let b = comment("x", "u2", "two", t0 + Duration::minutes(1));
    let c = comment("y", "u2", "two", t0 + Duration::minutes(2));
    let input = vec![c, b, a.clone()];
    assert_eq!(dedupe(input.clone()), vec![a]);
    assert_eq!(dedupe(input.clone()), pairwise_dedupe(input));
}

fn arb_comments() -> impl Strategy<Value = Vec<Comment>> {
    prop::collection::vec((0..6u8, 0..3u8, 0..3u8, 0..30i64), 0..25).prop_map(|rows| {
        let t0 = ts("2024-10-30T00:00:00Z");
        rows.into_iter()
            .map(|(id, author, text, minute)| {
                comment(&format!("c{id}"), &format!("u{author}"), &format!("text {text}"), t0 + Duration::minutes(minute))
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn dedupe_matches_pairwise_scan(input in arb_comments()) {
        let out = dedupe(input.clone());
        prop_assert_eq!(&out, &pairwise_dedupe(input.clone()));
        prop_assert_eq!(&dedupe(out.clone()), &out);
        prop_assert!(out.len() <= input.len());
        let ids: HashSet<&str> = out.iter().map(|c| c.comment_id.as_str()).collect();
        prop_assert_eq!(ids.len(), out.len());
    }

    #[test]
    fn day_index_is_monotone_and_calendar_based(a in 0i64..(8 * 86_400), b in 0i64..(8 * 86_400)) {
        let w = AnalysisWindow::election_week_2024();
        let t0 = ts("2024-10-29T00:00:00Z");
        let (lo, hi) = (a.min(b), a.max(b));
        let (dl, dh) = (
            day_index(&(t0 + Duration::seconds(lo)), &w).unwrap(),
            day_index(&(t0 + Duration::seconds(hi)), &w).unwrap(),
        );
        prop_assert!(dl <= dh);
        prop_assert_eq!(dl, DayIndex((lo / 86_400) as u32));
    }
}

#[test]
fn day_index_examples() {
    let w = AnalysisWindow::election_week_2024();
    assert_eq!(day_index(&ts("2024-10-29T13:00:00Z"), &w).unwrap(), DayIndex(0));
    assert_eq!(day_index(&ts("2024-10-29T23:59:00Z"), &w).unwrap(), DayIndex(0));
    assert_eq!(day_index(&ts("2024-11-05T01:00:00Z"), &w).unwrap(), DayIndex(7));
    assert!(day_index(&ts("2024-11-06T00:00:00Z"), &w).is_err());
    assert!(day_index(&ts("2024-10-28T23:59:59Z"), &w).is_err());
}

fn sized_corpus(top: usize, replies: usize) -> Corpus {
    let w = AnalysisWindow::election_week_2024();
    let t0 = Utc.with_ymd_and_hms(2024, 10, 29, 0, 0, 0).unwrap();
    let video = Video {
        video_id: "v".into(),
        channel: Channel::new("NYT"),
        title: "Trump and Harris".into(),
        description: String::new(),
        tags: vec![],
        published_at: t0,
    };
    let mut comments = Vec::with_capacity(top + replies);
    for i in 0..top + replies {
        let mut c = comment(&format!("c{i:05}"), &format!("u{i}"), "words", t0 + Duration::seconds(i as i64 * 60));
        if i >= top {
            c.is_reply = true;
            c.parent_id = Some(format!("c{:05}", i % top));
        }
        comments.push(c);
    }
    Corpus::new(vec![video], comments, w)
}

#[test]
fn large_corpus_round_trips_with_split_preserved() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    let corpus = sized_corpus(4157, 3652);
    store_corpus(&corpus, &path).unwrap();
    let loaded = load_corpus(&path).unwrap();
    assert_eq!(loaded, corpus);
    assert_eq!((loaded.top_level_count(), loaded.reply_count()), (4157, 3652));
    assert_eq!(loaded.top_level_count() + loaded.reply_count(), loaded.comments.len());
}

#[test]
fn schema_errors_name_the_line() {
    let window = r#"{"kind":"window","start_date":"2024-10-29","end_date":"2024-11-05"}"#;
    let bad = r#"{"kind":"comment","video_id":"v","channel":"NYT","author_key":"a","text":"t","published_at":"2024-10-30T00:00:00Z","is_reply":false}"#;
    match parse_corpus(format!("{bad}\n{window}\n").as_bytes()) {
        Err(CorpusError::Schema { line, message }) => {
            assert_eq!(line, 1);
            assert!(message.contains("comment_id"), "{message}");
        }
        other => panic!("expected a schema error, got {other:?}"),
    }
}

fn api_fixture_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_api_fixture(dir.path(), API_FIXTURE_SEED).unwrap();
    dir
}

#[test]
fn search_keeps_in_window_on_topic_videos_only() {
    let dir = api_fixture_dir();
    let client = YouTubeClient::new(FixtureTransport::new(dir.path()), None, "salt");
    let videos = client.search_videos(&api_fixture_search()).unwrap();
    let ids: Vec<&str> = videos.iter().map(|v| v.video_id.as_str()).collect();
    assert_eq!(ids, ["vid-keep"]);
    assert_eq!(videos[0].channel, Channel::new("NYT"));
}

#[test]
fn pagination_and_reply_bookkeeping() {
    let dir = api_fixture_dir();
    let client = YouTubeClient::new(FixtureTransport::new(dir.path()), None, "salt");
    let corpus = ingest(&client, &api_fixture_search(), 2).unwrap();
    assert_eq!(corpus.comments.len(), 210);
    assert_eq!(corpus.comments.iter().filter(|c| c.is_reply).count(), 10);
    let ids: HashSet<&str> = corpus.comments.iter().map(|c| c.comment_id.as_str()).collect();
    for c in &corpus.comments {
        assert_eq!(c.is_reply, c.parent_id.is_some());
        if let Some(p) = &c.parent_id {
            assert!(ids.contains(p.as_str()));
        }
        assert_eq!(c.channel, Channel::new("NYT"));
        assert_eq!(c.author_key.len(), 16);
    }
    assert_eq!(dedupe(corpus.comments.clone()).len(), 210);
}

#[test]
fn ingestion_is_byte_deterministic() {
    let dir = api_fixture_dir();
    let out = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, workers) in [1, 4].iter().enumerate() {
        let client = YouTubeClient::new(FixtureTransport::new(dir.path()), None, "salt");
        let corpus = ingest(&client, &api_fixture_search(), *workers).unwrap();
        let path = out.path().join(format!("c{i}.jsonl"));
        store_corpus(&corpus, &path).unwrap();
        bytes.push(std::fs::read(path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn disabled_comments_are_skipped() {
    let dir = api_fixture_dir();
    let body = r#"{"error":{"code":403,"message":"The video has disabled comments.","errors":[{"reason":"commentsDisabled"}]}}"#;
    write_fixture(dir.path(), &requests::comment_threads("vid-closed", None), body).unwrap();
    let client = YouTubeClient::new(FixtureTransport::new(dir.path()), None, "salt");
    let mut videos = client.search_videos(&api_fixture_search()).unwrap();
    let closed = Video {
        video_id: "vid-closed".into(),
        ..videos[0].clone()
    };
    assert!(matches!(client.fetch_comments(&closed), Err(IngestError::CommentsDisabled { .. })));
    videos.push(closed);
    assert_eq!(fetch_all_comments(&client, &videos, 2).unwrap().len(), 210);
}

#[test]
fn normalize_examples() {
    let sw = StopwordSet::from_words(["is", "up"], "test");
    assert!(normalize("", &sw).is_empty());
    assert_eq!(normalize("Inflation is UP!!! 100%", &sw).tokens, ["inflation"]);
    assert_eq!(normalize("Border-crisis, BORDER crisis.", &sw).tokens, ["border", "crisis", "border", "crisis"]);
}

#[test]
fn grouping_conserves_tokens() {
    let sw = StopwordSet::default_english();
    let mut corpus = sized_corpus(3, 0);
    let texts = ["border wall now", "inflation hurts", "vote democracy"];
    let days = [0, 0, 1];
    for ((c, t), d) in corpus.comments.iter_mut().zip(texts).zip(days) {
        c.text = t.into();
        c.published_at = ts("2024-10-29T12:00:00Z") + Duration::days(d) + Duration::seconds(c.published_at.timestamp() % 60);
    }
    let grouped = group_concat(&corpus, &sw);
    assert_eq!(grouped.groups.len(), 2);
    let per_comment: usize = texts.iter().map(|t| normalize(t, &sw).len()).sum();
    assert_eq!(grouped.total_tokens(), per_comment);
    let day0 = grouped.groups.values().next().unwrap();
    assert_eq!(day0.num_comments(), 2);
    assert_eq!(day0.comment_tokens(1), normalize(texts[1], &sw).tokens.as_slice());
    assert_eq!(grouped, group_concat(&corpus, &sw));
}

proptest! {
    #[test]
    fn normalize_is_idempotent_and_drops_stopwords(text in "[a-zA-Z0-9 ,.!'-]{0,80}") {
        let sw = StopwordSet::default_english();
        let once = normalize(&text, &sw);
        prop_assert_eq!(&normalize(&once.to_text(), &sw), &once);
        prop_assert!(once.tokens.iter().all(|t| !sw.contains(t)));
    }
}
