//! The semantic branch in memory: embed sentences generated from the issue
//! taxonomy, reduce, cluster, summarize with TF-IDF and label each cluster.
//! The second half labels the same summaries through a replay cache of
//! chat answers, with no network access.
//!
//! ```bash
//! cargo run --release --example label
//! ```

use std::error::Error;

use salience::cluster::{cluster, ClustererConfig};
use salience::embed::{embed_batch, FallbackConfig, FallbackProvider};
use salience::keywords::IssueTaxonomy;
use salience::labeling::{
    build_prompt, label_clusters, summarize_clusters, LabelOutcome, LabelerMode, ReplayClient, DEFAULT_THETA,
    STRICT_REMINDER,
};
use salience::pipeline::reduce_small_safe;
use salience::reduce::ReducerConfig;
use salience::synthetic::keyword_sentences;
use salience::textprep::{normalize, StopwordSet};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let stopwords = StopwordSet::default_english();
    let taxonomy = IssueTaxonomy::default_with(&stopwords);
    let sentences = keyword_sentences(50, 0);
    let items: Vec<(String, String)> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("s{i:03}"), s.text.clone()))
        .collect();
    let matrix = embed_batch(&FallbackProvider::new(FallbackConfig::default()), &items)?;
    let layout = reduce_small_safe(&matrix, &ReducerConfig::default().with_components(5))?;
    let assignment = cluster(&matrix.ids, &layout.coords, &ClustererConfig::default())?;

    let texts: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
    let docs: Vec<Vec<String>> = texts.iter().map(|t| normalize(t, &stopwords).tokens).collect();
    let summaries = summarize_clusters(&assignment, &docs, &texts, &layout.coords, 10, 3);
    let decisions = label_clusters(&summaries, &taxonomy, LabelerMode::Fallback, None, DEFAULT_THETA)?;

    println!("{} sentences -> {} clusters, {} noise", items.len(), assignment.cluster_count, assignment.noise_count());
    for (s, d) in summaries.iter().zip(&decisions) {
        let terms: Vec<&str> = s.top_terms.iter().take(4).map(|t| t.term.as_str()).collect();
        println!("  cluster {} ({} members) {:?} -> {:?}", s.cluster_id, s.size, terms, d.outcome);
    }

    let cache = tempfile::tempdir()?;
    let client = ReplayClient::replay(cache.path());
    for (i, s) in summaries.iter().enumerate() {
        let prompt = build_prompt(s, &taxonomy);
        match i {
            0 => {
                client.store(&prompt, "NEW: Foreign Policy")?;
            }
            1 => {
                client.store(&prompt, "I think this is about several things.")?;
                client.store(&format!("{prompt}{STRICT_REMINDER}"), "Hard to say.")?;
            }
            _ => {
                let LabelOutcome::Predefined(name) = &decisions[i].outcome else { continue };
                client.store(&prompt, &format!("{name}\n"))?;
            }
        }
    }
    for mode in [LabelerMode::Llm, LabelerMode::LlmWithFallback] {
        let llm = label_clusters(&summaries, &taxonomy, mode, Some(&client), DEFAULT_THETA)?;
        println!("\nreplayed answers, labeler {mode:?}:");
        for d in &llm {
            println!("  cluster {} -> {:?} via {:?}", d.cluster_id, d.outcome, d.source);
        }
    }
    println!("live calls: {}", client.live_calls());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
