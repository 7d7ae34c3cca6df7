//! Embed comments with the deterministic hashed n-gram provider and round
//! trip the matrix through the on-disk container.
//!
//! ```bash
//! cargo run --example embed
//! ```

use std::error::Error;

use salience::embed::{cosine, embed_batch, read_matrix, write_matrix, FallbackConfig, FallbackProvider};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let texts = [
        "secure the border and stop illegal immigration",
        "illegal immigration at the southern border",
        "grocery prices and inflation are out of control",
        "the cost of living keeps going up",
    ];
    let items: Vec<(String, String)> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| (format!("c{i}"), t.to_string()))
        .collect();
    let provider = FallbackProvider::new(FallbackConfig::default());
    let matrix = embed_batch(&provider, &items)?;
    println!("provider {} -> {} x {}", matrix.provider_name, matrix.len(), matrix.dim);

    println!("\ncosine similarity:");
    for i in 0..texts.len() {
        let row: Vec<String> = (0..texts.len())
            .map(|j| format!("{:6.3}", cosine(&matrix.rows[i], &matrix.rows[j])))
            .collect();
        println!("  c{i} {}", row.join(" "));
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("embeddings.emb");
    let stored = matrix.quantized();
    write_matrix(&path, &stored)?;
    let back = read_matrix(&path)?;
    assert_eq!(back, stored);
    println!("\nwrote and re-read {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
