//! Chi-square goodness of fit of issue counts against a uniform null, and
//! rank comparison of two methods.
//!
//! ```bash
//! cargo run --example chi_square
//! ```

use std::error::Error;

use salience::analyze::{chi_square_gof, chi_square_sf, rank_issues, top_k_overlap};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let g = chi_square_gof(&[50, 30, 20], None)?;
    println!("[50, 30, 20]: chi2 = {:.4}, df = {}, p = {:.6e} (e^-7 = {:.6e})", g.statistic, g.df, g.p_value, (-7.0f64).exp());

    let issues: Vec<String> = ["Immigration", "Inflation", "Identity politics", "Democracy", "Public health"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let keyword = [420, 180, 390, 300, 150];
    let cluster = [260, 70, 190, 310, 60];
    for (name, counts) in [("keyword", &keyword), ("cluster", &cluster)] {
        let g = chi_square_gof(counts, None)?;
        println!("{name:<8} chi2 = {:9.3}, df = {}, p = {:.3e}", g.statistic, g.df, g.p_value);
    }
    let kr = rank_issues(&issues, &keyword);
    let cr = rank_issues(&issues, &cluster);
    println!("keyword rank: {kr:?}");
    println!("cluster rank: {cr:?}");
    println!("top-3 overlap: {}", top_k_overlap(&kr, &cr, 3));

    println!("\nupper tail P(X > x) for df = 4:");
    for x in [1.0, 5.0, 9.488, 20.0, 99.85] {
        println!("  x = {x:7.3}: {:.6e}", chi_square_sf(x, 4));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
