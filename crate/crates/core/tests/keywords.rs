mod common;

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use salience::analyze::rank_issues;
use salience::corpus::{AnalysisWindow, Channel, Comment, Corpus, DayIndex, Video};
use salience::keywords::{
    match_comment, match_text, salience_table_keywords, CountingUnit, IssueTaxonomy, Matcher, MethodTag,
};
use salience::synthetic::{issue_phrases, issue_sentence};
use salience::textprep::{normalize, StopwordSet};

use common::oracle_match;

fn setup() -> (IssueTaxonomy, StopwordSet) {
    let stopwords = StopwordSet::default_english();
    (IssueTaxonomy::default_with(&stopwords), stopwords)
}

fn check_against_oracle(text: &str, taxonomy: &IssueTaxonomy, stopwords: &StopwordSet) -> Vec<u64> {
    let tokens = normalize(text, stopwords);
    let got = match_comment(&tokens, text, taxonomy);
    assert_eq!(got.per_rule, oracle_match(&tokens.tokens, text, taxonomy), "{text:?}");
    got.per_issue
}

#[test]
fn longest_match_consumes_the_shorter_keyword() {
    let (tax, sw) = setup();
    assert_eq!(check_against_oracle("the border crisis is real", &tax, &sw), vec![1, 0, 0, 0, 0]);
}

#[test]
fn repeated_prefix_counts_both_occurrences() {
    let (tax, sw) = setup();
    assert_eq!(check_against_oracle("woke woke agenda", &tax, &sw), vec![0, 0, 2, 0, 0]);
}

#[test]
fn unrelated_text_matches_nothing() {
    let (tax, sw) = setup();
    assert_eq!(check_against_oracle("I love puppies", &tax, &sw), vec![0; 5]);
}

fn comment(id: &str, channel: &str, day: i64, text: &str) -> Comment {
    let start = Utc.with_ymd_and_hms(2024, 10, 29, 12, 0, 0).unwrap();
    Comment {
        comment_id: id.into(),
        video_id: format!("{}-v", channel.to_lowercase()),
        channel: Channel::new(channel),
        author_key: format!("a-{id}"),
        text: text.into(),
        published_at: start + Duration::days(day),
        is_reply: false,
        parent_id: None,
    }
}

fn corpus(comments: Vec<Comment>) -> Corpus {
    let published = Utc.with_ymd_and_hms(2024, 10, 28, 0, 0, 0).unwrap();
    let videos = ["NYT", "WSJ"]
        .iter()
        .map(|ch| Video {
            video_id: format!("{}-v", ch.to_lowercase()),
            channel: Channel::new(*ch),
            title: "Election".into(),
            description: String::new(),
            tags: vec![],
            published_at: published,
        })
        .collect();
    Corpus::new(videos, comments, AnalysisWindow::election_week_2024())
}

fn crafted() -> Vec<Comment> {
    vec![
        comment("c1", "NYT", 0, "Border crisis! Illegal immigrants at the border."),
        comment("c2", "NYT", 0, "Inflation and the high price of gas. Cost of living is brutal."),
        comment("c3", "WSJ", 1, "Woke agenda, DEI and critical race theory; so woke."),
        comment("c4", "WSJ", 1, "January 6 was an attack on democracy. J6 never again."),
        comment("c5", "NYT", 2, "RFK Jr. says MAHA: Make America Healthy Again, vaccines bad"),
        comment("c6", "WSJ", 2, "Transgender athletes in sports and gender affirming care for children"),
    ]
}

#[test]
fn crafted_corpus_matches_hand_counts() {
    let (tax, sw) = setup();
    // c1: border crisis, illegal immigrants, border -> 3
    // c2: inflation, high price of gas, cost of living -> 3
    // c3: woke agenda, dei, critical race theory, woke -> 4
    // c4: january 6, democracy, j6 -> 3
    // c5: rfk jr, maha, make america healthy again, vaccines -> 4
    // c6: transgender, transgender+sports, gender affirming care+children -> 3
    let hand = [[3, 0, 0, 0, 0], [0, 3, 0, 0, 0], [0, 0, 4, 0, 0], [0, 0, 0, 3, 0], [0, 0, 0, 0, 4], [0, 0, 3, 0, 0]];
    for (c, want) in crafted().iter().zip(hand) {
        assert_eq!(check_against_oracle(&c.text, &tax, &sw), want, "{}", c.comment_id);
    }
    let table = salience_table_keywords(&corpus(crafted()), &tax, &sw, CountingUnit::Occurrences);
    assert_eq!(table.method, MethodTag::KeywordMethod);
    assert_eq!(table.issue_totals(), vec![3, 3, 7, 3, 4]);
    assert_eq!(table.get(0, DayIndex(0), &Channel::new("NYT")), 3);
    assert_eq!(table.get(2, DayIndex(1), &Channel::new("WSJ")), 4);
    assert_eq!(table.get(2, DayIndex(2), &Channel::new("WSJ")), 3);
    assert_eq!(table.get(4, DayIndex(2), &Channel::new("NYT")), 4);

    let comments = salience_table_keywords(&corpus(crafted()), &tax, &sw, CountingUnit::Comments);
    assert_eq!(comments.issue_totals(), vec![1, 1, 2, 1, 1]);
}

#[test]
fn empty_corpus_gives_empty_table() {
    let (tax, sw) = setup();
    let table = salience_table_keywords(&corpus(vec![]), &tax, &sw, CountingUnit::Occurrences);
    assert!(table.is_empty());
}

#[test]
fn table_is_additive_and_ignores_unmatched_comments() {
    let (tax, sw) = setup();
    let all = crafted();
    let whole = salience_table_keywords(&corpus(all.clone()), &tax, &sw, CountingUnit::Occurrences);
    let mut parts = salience_table_keywords(&corpus(all[..2].to_vec()), &tax, &sw, CountingUnit::Occurrences);
    parts.merge(&salience_table_keywords(&corpus(all[2..].to_vec()), &tax, &sw, CountingUnit::Occurrences));
    assert_eq!(whole, parts);

    let mut padded = all.clone();
    padded.push(comment("c7", "NYT", 3, "I love puppies and pizza"));
    let with_chatter = salience_table_keywords(&corpus(padded), &tax, &sw, CountingUnit::Occurrences);
    assert_eq!(whole, with_chatter);

    let per_comment: u64 = all.iter().map(|c| match_text(&c.text, &tax, &sw).total()).sum();
    assert_eq!(whole.total(), per_comment);
}

#[test]
fn immigration_ranks_first_when_mentioned_most() {
    let (tax, sw) = setup();
    let phrases = issue_phrases();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Mention volumes in the order Immigration, Identity politics, Democracy, Public health, Inflation.
    let volumes = [60, 10, 45, 30, 20];
    let mut comments = Vec::new();
    for (issue, &n) in volumes.iter().enumerate() {
        for k in 0..n {
            let text = issue_sentence(&mut rng, &phrases[issue].1);
            let ch = if k % 2 == 0 { "NYT" } else { "WSJ" };
            comments.push(comment(&format!("i{issue}-{k}"), ch, (k % 7) as i64, &text));
        }
    }
    let table = salience_table_keywords(&corpus(comments), &tax, &sw, CountingUnit::Occurrences);
    assert_eq!(rank_issues(&table.issues, &table.issue_totals())[0], "Immigration");
}

const VOCAB: &[&str] = &[
    "border", "crisis", "woke", "agenda", "wokeness", "trans", "transgender", "sports", "gender", "identity",
    "affirming", "care", "children", "rfk", "jr", "maha", "make", "america", "healthy", "illegal", "immigrants",
    "immigration", "migrant", "crime", "cost", "living", "high", "price", "food", "gas", "democracy", "election",
    "denial", "covid", "public", "health", "people", "vote", "the", "6", "j6", "january",
];

proptest! {
    #[test]
    fn scanner_equals_exhaustive_oracle(words in prop::collection::vec(prop::sample::select(VOCAB), 0..24)) {
        let (tax, sw) = setup();
        let text = words.join(" ");
        let tokens = normalize(&text, &sw);
        prop_assume!(tokens.len() <= 20);
        let got = Matcher::new(&tax).match_comment(&tokens, &text, CountingUnit::Occurrences);
        prop_assert_eq!(got.per_rule, oracle_match(&tokens.tokens, &text, &tax));
    }

    #[test]
    fn matching_ignores_case(words in prop::collection::vec(prop::sample::select(VOCAB), 0..15), upper in any::<u64>()) {
        let (tax, sw) = setup();
        let text: Vec<String> = words
            .iter()
            .enumerate()
            .map(|(i, w)| if upper >> (i % 64) & 1 == 1 { w.to_uppercase() } else { w.to_string() })
            .collect();
        let text = text.join(" ");
        prop_assert_eq!(match_text(&text, &tax, &sw), match_text(&text.to_lowercase(), &tax, &sw));
    }

    #[test]
    fn issue_count_is_sum_of_rule_counts(words in prop::collection::vec(prop::sample::select(VOCAB), 0..20)) {
        let (tax, sw) = setup();
        let m = match_text(&words.join(" "), &tax, &sw);
        for (total, rules) in m.per_issue.iter().zip(&m.per_rule) {
            prop_assert_eq!(*total, rules.iter().sum::<u64>());
        }
    }
}
