//! Ingest comments from recorded YouTube Data API responses, then dedupe
//! and split them into top-level comments and replies.
//!
//! ```bash
//! cargo run --example ingest
//! ```

use std::error::Error;

use salience::corpus::{dedupe, ingest, Corpus, YouTubeClient};
use salience::http::FixtureTransport;
use salience::synthetic::{api_fixture_search, write_api_fixture, API_FIXTURE_SEED};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    write_api_fixture(dir.path(), API_FIXTURE_SEED)?;

    let search = api_fixture_search();
    let client = YouTubeClient::new(FixtureTransport::new(dir.path()), None, "example-salt");
    let raw = ingest(&client, &search, 4)?;
    println!("videos kept after window and keyword filters: {}", raw.videos.len());
    for v in &raw.videos {
        println!("  {} [{}] {}", v.video_id, v.channel, v.title);
    }

    let corpus = Corpus::new(raw.videos.clone(), dedupe(raw.comments.clone()), raw.window);
    corpus.validate()?;
    println!("comments fetched: {}", raw.comments.len());
    println!("after dedupe:     {}", corpus.comments.len());
    println!("top-level:        {}", corpus.top_level_count());
    println!("replies:          {}", corpus.reply_count());
    println!("out of window:    {}", corpus.out_of_window_count());

    let again = dedupe(corpus.comments.clone());
    assert_eq!(again, corpus.comments, "dedupe is idempotent");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
