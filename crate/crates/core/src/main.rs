use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use salience::labeling::LabelerMode;
use salience::pipeline::{Pipeline, PipelineError, ProviderKind, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "salience", version, about = "Issue salience in social-media comments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Load or download the raw corpus.
    Fetch(Common),
    /// Remove duplicate comments.
    Dedupe(Common),
    /// Count taxonomy keywords per issue, day and channel.
    Keywords(Common),
    /// Embed in-window comments.
    Embed(Common),
    /// Compute the clustering and plotting layouts.
    Reduce(Common),
    /// Density-cluster the clustering layout.
    Cluster(Common),
    /// Summarize, label and filter clusters.
    Label(Common),
    /// Chi-square tests and method comparison.
    Stats(Common),
    /// Render the figures.
    Report(Common),
    /// Run every stage, or only `--stage`.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// JSONL corpus, overriding the config.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// precomputed | remote | fallback
    #[arg(long)]
    provider: Option<ProviderKind>,
    /// llm | fallback | llm-with-fallback
    #[arg(long)]
    labeler: Option<LabelerMode>,
    /// Replay recorded HTTP responses from this directory.
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
    /// Run a single stage.
    #[arg(long)]
    stage: Option<Stage>,
}

fn build(c: &Common) -> Result<Pipeline, PipelineError> {
    let cwd = std::env::current_dir().unwrap_or_default();
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = &c.corpus {
        cfg.corpus = Some(cwd.join(p));
    }
    if let Some(p) = c.provider {
        cfg.embedding.provider = p;
    }
    if let Some(l) = c.labeler {
        cfg.labeler = l;
    }
    if let Some(d) = &c.fixture_dir {
        cfg.fixture_dir = Some(cwd.join(d));
    }
    Pipeline::new(cfg, &c.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (common, stages): (&Common, Vec<Stage>) = match &cli.verb {
        Verb::Fetch(c) => (c, vec![Stage::Fetch]),
        Verb::Dedupe(c) => (c, vec![Stage::Dedupe]),
        Verb::Keywords(c) => (c, vec![Stage::Keywords]),
        Verb::Embed(c) => (c, vec![Stage::Embed]),
        Verb::Reduce(c) => (c, vec![Stage::Reduce]),
        Verb::Cluster(c) => (c, vec![Stage::Cluster]),
        Verb::Label(c) => (c, vec![Stage::Label]),
        Verb::Stats(c) => (c, vec![Stage::Stats]),
        Verb::Report(c) => (c, vec![Stage::Report]),
        Verb::Run(c) => (c, c.stage.map_or(Stage::ALL.to_vec(), |s| vec![s])),
    };
    let result = build(common).and_then(|p| p.run_stages(&stages));
    match result {
        Ok(m) => {
            for (k, v) in &m.counts {
                println!("{k}\t{v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
