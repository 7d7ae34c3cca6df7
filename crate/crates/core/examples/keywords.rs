//! Keyword-method salience: match the shipped issue taxonomy against
//! comments and tabulate occurrences per issue, day and channel.
//!
//! ```bash
//! cargo run --example keywords
//! ```

use std::error::Error;

use salience::corpus::dedupe;
use salience::keywords::{match_text, salience_table_keywords, CountingUnit, IssueTaxonomy};
use salience::synthetic::{fixture_corpus, FIXTURE_SEED};
use salience::textprep::{normalize, StopwordSet};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let stopwords = StopwordSet::default_english();
    let taxonomy = IssueTaxonomy::default_with(&stopwords);
    println!("{} issues, {} rules", taxonomy.len(), taxonomy.rule_count());

    let text = "The border crisis and illegal immigration, plus the cost of living!";
    println!("\n{text:?}");
    println!("  tokens: {}", normalize(text, &stopwords).to_text());
    let counts = match_text(text, &taxonomy, &stopwords);
    for (issue, n) in counts.issues.iter().zip(&counts.per_issue) {
        if *n > 0 {
            println!("  {issue}: {n}");
        }
    }

    let mut corpus = fixture_corpus(FIXTURE_SEED);
    corpus.comments = dedupe(corpus.comments);
    for unit in [CountingUnit::Occurrences, CountingUnit::Comments] {
        let table = salience_table_keywords(&corpus, &taxonomy, &stopwords, unit);
        println!("\nbundled corpus, counting {unit:?}:");
        for (issue, total) in table.issues.iter().zip(table.issue_totals()) {
            println!("  {issue:<18} {total}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
