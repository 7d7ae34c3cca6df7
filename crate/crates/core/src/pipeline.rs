//! The staged batch pipeline.
//!
//! Stages run in order and communicate only through files in the output
//! directory, so any stage can be re-run once its predecessors exist:
//!
//! | stage      | reads                                   | writes |
//! |------------|-----------------------------------------|--------|
//! | `fetch`    | corpus file or the YouTube API          | `corpus.raw.jsonl` |
//! | `dedupe`   | `corpus.raw.jsonl`                      | `corpus.jsonl` |
//! | `keywords` | `corpus.jsonl`                          | `counts_keyword.csv` |
//! | `embed`    | `corpus.jsonl`                          | `embeddings.emb` |
//! | `reduce`   | `embeddings.emb`                        | `layout_5d.emb`, `layout_2d.emb` |
//! | `cluster`  | layouts, `corpus.jsonl`                 | `assignment.csv` |
//! | `label`    | `assignment.csv`, layouts, corpus       | `labels.json`, `clusters.csv`, `excluded.csv`, `counts_cluster.csv` |
//! | `stats`    | both count tables                       | `stats.json` |
//! | `report`   | count tables, `clusters.csv`, corpus    | six SVG figures |
//!
//! Every run also rewrites `manifest.json` with the effective config, input
//! checksums, per-stage counts and output checksums.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analyze::{salience_table_clusters, stats_report, AnalyzeError};
use crate::cluster::{cluster, ClusterAssignment, ClusterError, ClustererConfig};
use crate::corpus::{
    day_index, dedupe, ingest, load_corpus, store_corpus, Corpus, CorpusError, IngestError, SearchConfig,
    YouTubeClient, LIVE_BASE_URL,
};
use crate::embed::{
    embed_batch, fallback_embed, read_matrix, write_matrix, EmbedError, EmbeddingMatrix, EmbeddingProvider,
    FallbackConfig, FallbackProvider, PrecomputedProvider, RemoteProvider,
};
use crate::http::{FixtureTransport, HttpTransport, LiveTransport, RateLimited, TransportError};
use crate::keywords::{salience_table_keywords, CountingUnit, IssueTaxonomy, KeywordError, MethodTag};
use crate::labeling::{
    filter_offtopic, label_clusters, summarize_clusters, ChatClient, ClusterSummary, ExclusionReason,
    HttpChatClient, LabelDecision, LabelError, LabelerMode, LlmError, ReplayClient, DEFAULT_THETA,
    PROMPT_VERSION,
};
use crate::reduce::{reduce, LayoutEmbedding, ReduceError, ReducerConfig};
use crate::report::{
    emit_figures, read_assignment_csv, read_clusters_csv, read_counts_csv, write_assignment_csv,
    write_clusters_csv, write_counts_csv, write_excluded_csv, write_stats_json, AssignmentRow, ClusterRow,
    ReportError, FIGURE_FILES,
};
use crate::textprep::{normalize, StopwordSet};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RAW_CORPUS_FILE: &str = "corpus.raw.jsonl";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const KEYWORD_COUNTS_FILE: &str = "counts_keyword.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.emb";
pub const LAYOUT_5D_FILE: &str = "layout_5d.emb";
pub const LAYOUT_2D_FILE: &str = "layout_2d.emb";
pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const LABELS_FILE: &str = "labels.json";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const EXCLUDED_FILE: &str = "excluded.csv";
pub const CLUSTER_COUNTS_FILE: &str = "counts_cluster.csv";
pub const STATS_FILE: &str = "stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Fetch,
    Dedupe,
    Keywords,
    Embed,
    Reduce,
    Cluster,
    Label,
    Stats,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Fetch,
        Stage::Dedupe,
        Stage::Keywords,
        Stage::Embed,
        Stage::Reduce,
        Stage::Cluster,
        Stage::Label,
        Stage::Stats,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Fetch => "fetch",
            Stage::Dedupe => "dedupe",
            Stage::Keywords => "keywords",
            Stage::Embed => "embed",
            Stage::Reduce => "reduce",
            Stage::Cluster => "cluster",
            Stage::Label => "label",
            Stage::Stats => "stats",
            Stage::Report => "report",
        }
    }

    /// Files this stage writes, relative to the output directory.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Fetch => &[RAW_CORPUS_FILE],
            Stage::Dedupe => &[CORPUS_FILE],
            Stage::Keywords => &[KEYWORD_COUNTS_FILE],
            Stage::Embed => &[EMBEDDINGS_FILE],
            Stage::Reduce => &[LAYOUT_5D_FILE, LAYOUT_2D_FILE],
            Stage::Cluster => &[ASSIGNMENT_FILE],
            Stage::Label => &[LABELS_FILE, CLUSTERS_FILE, EXCLUDED_FILE, CLUSTER_COUNTS_FILE],
            Stage::Stats => &[STATS_FILE],
            Stage::Report => &FIGURE_FILES,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Precomputed,
    Remote,
    #[default]
    Fallback,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "precomputed" => Ok(ProviderKind::Precomputed),
            "remote" => Ok(ProviderKind::Remote),
            "fallback" => Ok(ProviderKind::Fallback),
            other => Err(format!("unknown provider {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteEmbeddingConfig {
    pub base_url: String,
    pub path: String,
    pub dim: usize,
    pub batch_size: usize,
    pub api_key_env: String,
}

impl Default for RemoteEmbeddingConfig {
    fn default() -> Self {
        RemoteEmbeddingConfig {
            base_url: "http://127.0.0.1:8080".into(),
            path: "/embed".into(),
            dim: 384,
            batch_size: 64,
            api_key_env: "EMBEDDING_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub fallback: FallbackConfig,
    /// Embedding container for the `precomputed` provider.
    pub precomputed: Option<PathBuf>,
    pub remote: RemoteEmbeddingConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub base_url: String,
    pub path: String,
    pub model: String,
    pub api_key_env: String,
    /// Replay cache of prompt/response pairs.
    pub cache_dir: Option<PathBuf>,
    /// Call the live endpoint on cache misses and store the answers.
    pub record: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: "https://api.openai.com".into(),
            path: "/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            cache_dir: None,
            record: false,
        }
    }
}

/// Everything a run needs. Relative paths resolve against the directory
/// of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// JSONL corpus to analyze instead of fetching.
    pub corpus: Option<PathBuf>,
    pub search: Option<SearchConfig>,
    /// `None` uses the shipped taxonomy.
    pub taxonomy: Option<PathBuf>,
    /// `None` uses the shipped English list.
    pub stopwords: Option<PathBuf>,
    pub keyword_unit: CountingUnit,
    pub embedding: EmbeddingConfig,
    /// Layout that is clustered.
    pub reduce_cluster: ReducerConfig,
    /// Layout that is plotted.
    pub reduce_plot: ReducerConfig,
    pub clusterer: ClustererConfig,
    pub labeler: LabelerMode,
    pub llm: LlmConfig,
    pub theta: f64,
    pub top_terms: usize,
    pub sample_comments: usize,
    pub seed: u64,
    /// Replay recorded HTTP responses from here instead of the network.
    pub fixture_dir: Option<PathBuf>,
    pub workers: usize,
    /// Requests per second against remote APIs.
    pub rate_limit: f64,
    pub author_salt: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            search: None,
            taxonomy: None,
            stopwords: None,
            keyword_unit: CountingUnit::Occurrences,
            embedding: EmbeddingConfig::default(),
            reduce_cluster: ReducerConfig::default().with_components(5),
            reduce_plot: ReducerConfig::default().with_components(2),
            clusterer: ClustererConfig::default(),
            labeler: LabelerMode::Fallback,
            llm: LlmConfig::default(),
            theta: DEFAULT_THETA,
            top_terms: 10,
            sample_comments: 5,
            seed: 42,
            fixture_dir: None,
            workers: 4,
            rate_limit: 5.0,
            author_salt: "salience".into(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("config: {e}")))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus);
        resolve(base, &mut self.taxonomy);
        resolve(base, &mut self.stopwords);
        resolve(base, &mut self.embedding.precomputed);
        resolve(base, &mut self.llm.cache_dir);
        resolve(base, &mut self.fixture_dir);
    }

    /// Derives the per-stage seeds from [`RunConfig::seed`].
    pub fn effective(&self) -> RunConfig {
        let mut cfg = self.clone();
        cfg.embedding.fallback.seed = substream(self.seed, "embed");
        let reduce_seed = substream(self.seed, "reduce");
        cfg.reduce_cluster.seed = reduce_seed;
        cfg.reduce_plot.seed = reduce_seed;
        cfg
    }

    /// Checks values and that every referenced path exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let config = |m: String| PipelineError::Config(m);
        let must_exist = |what: &str, p: &Option<PathBuf>| match p {
            Some(p) if !p.exists() => Err(config(format!("{what} not found: {}", p.display()))),
            _ => Ok(()),
        };
        must_exist("taxonomy file", &self.taxonomy)?;
        must_exist("stopword file", &self.stopwords)?;
        must_exist("corpus file", &self.corpus)?;
        must_exist("fixture directory", &self.fixture_dir)?;
        match (&self.corpus, &self.search) {
            (None, None) => return Err(config("config needs either `corpus` or `search`".into())),
            (None, Some(s)) => s.validate().map_err(|e| config(e.to_string()))?,
            _ => {}
        }
        if self.embedding.provider == ProviderKind::Precomputed {
            match &self.embedding.precomputed {
                None => return Err(config("provider `precomputed` needs `embedding.precomputed`".into())),
                p => must_exist("precomputed embeddings", p)?,
            }
        }
        self.embedding.fallback.validate().map_err(config)?;
        if self.labeler != LabelerMode::Fallback {
            match &self.llm.cache_dir {
                None if !self.llm.record => {
                    return Err(config("labeler needs `llm.cache_dir` or `llm.record`".into()))
                }
                Some(p) if !self.llm.record && !p.is_dir() => {
                    return Err(config(format!("llm cache directory not found: {}", p.display())))
                }
                _ => {}
            }
        }
        for (name, r) in [("reduce_cluster", &self.reduce_cluster), ("reduce_plot", &self.reduce_plot)] {
            if r.n_neighbors < 2 || r.n_components == 0 || !(r.min_dist >= 0.0 && r.min_dist < r.spread) {
                return Err(config(format!("{name}: invalid reducer settings")));
            }
        }
        self.clusterer.validate().map_err(|e| config(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(config(format!("theta must be in [0, 1], got {}", self.theta)));
        }
        if self.workers == 0 {
            return Err(config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// A named 64-bit seed derived from `seed`.
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Keyword(#[from] KeywordError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("missing input {path}; run the earlier stages first")]
    MissingInput { path: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    /// Process exit status: 2 config, 3 transport, 4 numerical, 5 schema, 1 other.
    pub fn exit_code(&self) -> i32 {
        let source = match self {
            PipelineError::Config(_) => return 2,
            PipelineError::Stage { source, .. } => source,
        };
        match source {
            StageError::MissingInput { .. } => 2,
            StageError::Keyword(_) => 2,
            StageError::Cluster(ClusterError::InvalidConfig(_)) => 2,
            StageError::Reduce(ReduceError::InvalidConfig(_)) => 2,
            StageError::Label(LabelError::NoClient(_)) => 2,
            StageError::Ingest(IngestError::Config(_)) => 2,
            StageError::Transport(_) => 3,
            StageError::Ingest(
                IngestError::Transport(_) | IngestError::Auth { .. } | IngestError::Quota { .. },
            ) => 3,
            StageError::Label(LabelError::Llm(
                LlmError::Transport(_) | LlmError::Quota(_) | LlmError::CacheMiss { .. },
            )) => 3,
            StageError::Embed(EmbedError::Provider { .. }) => 3,
            StageError::Reduce(_) | StageError::Cluster(_) | StageError::Analyze(_) => 4,
            StageError::Corpus(CorpusError::Schema { .. } | CorpusError::Invalid(_))
            | StageError::Ingest(IngestError::Decode { .. })
            | StageError::Embed(
                EmbedError::Format { .. } | EmbedError::DimensionMismatch { .. } | EmbedError::DuplicateId(_),
            )
            | StageError::Report(ReportError::Parse { .. })
            | StageError::Inconsistent(_) => 5,
            _ => 1,
        }
    }
}

/// Per-run audit record written to `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    pub failed_stage: Option<Stage>,
    pub error: Option<String>,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub stages: BTreeMap<Stage, String>,
    pub counts: BTreeMap<String, u64>,
    /// SHA-256 of each output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            status: "ok".into(),
            failed_stage: None,
            error: None,
            seed: config.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            stages: BTreeMap::new(),
            counts: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, StageError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| StageError::Inconsistent(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), StageError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| io_err(path, e))
    }

    fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.to_string(), n as u64);
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> StageError {
    StageError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn sha256_file(path: &Path) -> Result<String, StageError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// A validated config bound to an output directory.
pub struct Pipeline {
    config: RunConfig,
    outdir: PathBuf,
    taxonomy: IssueTaxonomy,
    stopwords: StopwordSet,
}

impl Pipeline {
    /// Validates `config` and loads shared inputs. Nothing is written.
    pub fn new(config: RunConfig, outdir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        config.validate()?;
        let config = config.effective();
        let stopwords = match &config.stopwords {
            Some(p) => StopwordSet::load(p)
                .map_err(|e| PipelineError::Config(format!("stopword file {}: {e}", p.display())))?,
            None => StopwordSet::default_english(),
        };
        let taxonomy = match &config.taxonomy {
            Some(p) => IssueTaxonomy::load(p, &stopwords)
                .map_err(|e| PipelineError::Config(format!("taxonomy file {}: {e}", p.display())))?,
            None => IssueTaxonomy::default_with(&stopwords),
        };
        Ok(Pipeline {
            config,
            outdir: outdir.into(),
            taxonomy,
            stopwords,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn outdir(&self) -> &Path {
        &self.outdir
    }

    pub fn taxonomy(&self) -> &IssueTaxonomy {
        &self.taxonomy
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.outdir.join(name)
    }

    /// Runs every stage in order.
    pub fn run(&self) -> Result<RunManifest, PipelineError> {
        self.run_stages(&Stage::ALL)
    }

    /// Runs `stages` in the given order, updating the manifest after each.
    pub fn run_stages(&self, stages: &[Stage]) -> Result<RunManifest, PipelineError> {
        let first = stages.first().copied().unwrap_or(Stage::Fetch);
        let wrap = |stage: Stage| move |source: StageError| PipelineError::Stage { stage, source };
        fs::create_dir_all(&self.outdir).map_err(|e| wrap(first)(io_err(&self.outdir, e)))?;
        let manifest_path = self.path(MANIFEST_FILE);
        let mut manifest = match RunManifest::load(&manifest_path) {
            Ok(m) if stages.len() < Stage::ALL.len() && m.config == self.config => m,
            _ => RunManifest::new(&self.config),
        };
        manifest.status = "ok".into();
        manifest.failed_stage = None;
        manifest.error = None;
        self.record_inputs(&mut manifest).map_err(wrap(first))?;
        for &stage in stages {
            log::info!("stage {stage}");
            manifest.stages.insert(stage, "running".into());
            match self.run_stage(stage, &mut manifest) {
                Ok(()) => {
                    manifest.stages.insert(stage, "ok".into());
                    for name in stage.outputs() {
                        let sum = sha256_file(&self.path(name)).map_err(wrap(stage))?;
                        manifest.outputs.insert(name.to_string(), sum);
                    }
                    manifest.write(&manifest_path).map_err(wrap(stage))?;
                }
                Err(source) => {
                    manifest.status = "FAILED".into();
                    manifest.failed_stage = Some(stage);
                    manifest.error = Some(source.to_string());
                    manifest.stages.insert(stage, "FAILED".into());
                    if let Err(e) = manifest.write(&manifest_path) {
                        log::error!("cannot write manifest: {e}");
                    }
                    return Err(PipelineError::Stage { stage, source });
                }
            }
        }
        Ok(manifest)
    }

    fn record_inputs(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let c = &self.config;
        for (role, path) in [
            ("corpus", &c.corpus),
            ("taxonomy", &c.taxonomy),
            ("stopwords", &c.stopwords),
            ("precomputed_embeddings", &c.embedding.precomputed),
        ] {
            if let Some(p) = path {
                manifest.inputs.insert(role.to_string(), sha256_file(p)?);
            }
        }
        Ok(())
    }

    pub fn run_stage(&self, stage: Stage, manifest: &mut RunManifest) -> Result<(), StageError> {
        match stage {
            Stage::Fetch => self.fetch(manifest),
            Stage::Dedupe => self.dedupe(manifest),
            Stage::Keywords => self.keywords(manifest),
            Stage::Embed => self.embed(manifest),
            Stage::Reduce => self.reduce(manifest),
            Stage::Cluster => self.cluster(manifest),
            Stage::Label => self.label(manifest),
            Stage::Stats => self.stats(),
            Stage::Report => self.report(),
        }
    }

    fn input(&self, name: &str) -> Result<PathBuf, StageError> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(StageError::MissingInput {
                path: p.display().to_string(),
            })
        }
    }

    fn load_corpus(&self) -> Result<Corpus, StageError> {
        Ok(load_corpus(&self.input(CORPUS_FILE)?)?)
    }

    fn read_matrix(&self, name: &str) -> Result<EmbeddingMatrix, StageError> {
        Ok(read_matrix(&self.input(name)?)?)
    }

    fn transport(&self, base_url: &str) -> Result<Box<dyn HttpTransport>, StageError> {
        Ok(match &self.config.fixture_dir {
            Some(dir) => Box::new(FixtureTransport::new(dir.clone())),
            None => Box::new(RateLimited::new(LiveTransport::new(base_url)?, self.config.rate_limit)),
        })
    }

    fn fetch(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let corpus = match (&self.config.corpus, &self.config.search) {
            (Some(path), _) => load_corpus(path)?,
            (None, Some(search)) => {
                let key = std::env::var(&search.api_key_env).ok();
                let client = YouTubeClient::new(self.transport(LIVE_BASE_URL)?, key, &self.config.author_salt);
                ingest(&client, search, self.config.workers)?
            }
            (None, None) => unreachable!("validated at startup"),
        };
        manifest.count("videos", corpus.videos.len());
        manifest.count("raw_comments", corpus.comments.len());
        store_corpus(&corpus, &self.path(RAW_CORPUS_FILE))?;
        Ok(())
    }

    fn dedupe(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let raw = load_corpus(&self.input(RAW_CORPUS_FILE)?)?;
        let corpus = Corpus::new(raw.videos, dedupe(raw.comments), raw.window);
        corpus.validate()?;
        manifest.count("deduped", corpus.comments.len());
        manifest.count("in_window", corpus.analyzed_comments().count());
        manifest.count("out_of_window", corpus.out_of_window_count());
        manifest.count("top_level", corpus.top_level_count());
        manifest.count("replies", corpus.reply_count());
        store_corpus(&corpus, &self.path(CORPUS_FILE))?;
        Ok(())
    }

    fn keywords(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let corpus = self.load_corpus()?;
        let table = salience_table_keywords(&corpus, &self.taxonomy, &self.stopwords, self.config.keyword_unit);
        manifest.count("keyword_matches", table.total() as usize);
        write_counts_csv(&self.path(KEYWORD_COUNTS_FILE), &table)?;
        Ok(())
    }

    /// In-window comments with at least one token, as `(id, text)`.
    fn embeddable(&self, corpus: &Corpus) -> Vec<(String, String)> {
        let fallback = (self.config.embedding.provider == ProviderKind::Fallback)
            .then_some(&self.config.embedding.fallback);
        corpus
            .analyzed_comments()
            .filter(|c| !normalize(&c.text, &self.stopwords).is_empty())
            .filter(|c| fallback.map_or(true, |f| !fallback_embed(&c.text, f).degenerate))
            .map(|c| (c.comment_id.clone(), c.text.clone()))
            .collect()
    }

    fn embed(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let corpus = self.load_corpus()?;
        let items = self.embeddable(&corpus);
        let e = &self.config.embedding;
        let provider: Box<dyn EmbeddingProvider> = match e.provider {
            ProviderKind::Fallback => Box::new(FallbackProvider::new(e.fallback)),
            ProviderKind::Precomputed => Box::new(PrecomputedProvider::load(
                e.precomputed.as_deref().expect("validated at startup"),
            )?),
            ProviderKind::Remote => Box::new(
                RemoteProvider::new(self.transport(&e.remote.base_url)?, e.remote.path.clone(), e.remote.dim)
                    .with_batch_size(e.remote.batch_size)
                    .with_api_key(std::env::var(&e.remote.api_key_env).ok()),
            ),
        };
        let matrix = embed_batch(provider.as_ref(), &items)?.quantized();
        manifest.count("embedded", matrix.len());
        write_matrix(&self.path(EMBEDDINGS_FILE), &matrix)?;
        Ok(())
    }

    fn reduce(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let matrix = self.read_matrix(EMBEDDINGS_FILE)?;
        for (cfg, name) in [
            (&self.config.reduce_cluster, LAYOUT_5D_FILE),
            (&self.config.reduce_plot, LAYOUT_2D_FILE),
        ] {
            let layout = reduce_small_safe(&matrix, cfg)?;
            if !layout.spectral_init {
                log::warn!("{name}: spectral initialization failed, used random init");
            }
            write_matrix(&self.path(name), &layout.to_matrix().quantized())?;
        }
        manifest.count("reduced", matrix.len());
        Ok(())
    }

    fn cluster(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let corpus = self.load_corpus()?;
        let high = self.read_matrix(LAYOUT_5D_FILE)?;
        let plot = self.read_matrix(LAYOUT_2D_FILE)?;
        if high.ids != plot.ids {
            return Err(StageError::Inconsistent("layout files list different ids".into()));
        }
        let assignment = cluster(&high.ids, &high.rows, &self.config.clusterer)?;
        let rows = assignment_rows(&corpus, &assignment, &plot)?;
        manifest.count("clustered", assignment.ids.len() - assignment.noise_count());
        manifest.count("clusters", assignment.cluster_count);
        manifest.count("noise", assignment.noise_count());
        write_assignment_csv(&self.path(ASSIGNMENT_FILE), &rows)?;
        Ok(())
    }

    fn chat_client(&self) -> Result<Option<Box<dyn ChatClient>>, StageError> {
        if self.config.labeler == LabelerMode::Fallback {
            return Ok(None);
        }
        let llm = &self.config.llm;
        let dir = llm.cache_dir.clone().unwrap_or_else(|| self.path("llm_cache"));
        let client = if llm.record {
            let live = HttpChatClient::new(
                self.transport(&llm.base_url)?,
                llm.path.clone(),
                llm.model.clone(),
                std::env::var(&llm.api_key_env).ok(),
            );
            ReplayClient::recording(dir, Box::new(live))
        } else {
            ReplayClient::replay(dir)
        };
        Ok(Some(Box::new(client)))
    }

    fn label(&self, manifest: &mut RunManifest) -> Result<(), StageError> {
        let corpus = self.load_corpus()?;
        let rows = read_assignment_csv(&self.input(ASSIGNMENT_FILE)?)?;
        let high = self.read_matrix(LAYOUT_5D_FILE)?;
        let ids: Vec<String> = rows.iter().map(|r| r.comment_id.clone()).collect();
        if ids != high.ids {
            return Err(StageError::Inconsistent(format!(
                "{ASSIGNMENT_FILE} and {LAYOUT_5D_FILE} list different ids"
            )));
        }
        let labels: Vec<i64> = rows.iter().map(|r| r.label).collect();
        let assignment = ClusterAssignment {
            cluster_count: labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize),
            ids,
            labels,
            config: self.config.clusterer.clone(),
        };
        let by_id: BTreeMap<&str, &str> = corpus
            .comments
            .iter()
            .map(|c| (c.comment_id.as_str(), c.text.as_str()))
            .collect();
        let mut texts = Vec::with_capacity(rows.len());
        for id in &assignment.ids {
            let text = by_id
                .get(id.as_str())
                .ok_or_else(|| StageError::Inconsistent(format!("{id} is not in {CORPUS_FILE}")))?;
            texts.push(text.to_string());
        }
        let docs: Vec<Vec<String>> = texts.iter().map(|t| normalize(t, &self.stopwords).tokens).collect();
        let summaries = summarize_clusters(
            &assignment,
            &docs,
            &texts,
            &high.rows,
            self.config.top_terms,
            self.config.sample_comments,
        );
        let client = self.chat_client()?;
        let decisions = label_clusters(
            &summaries,
            &self.taxonomy,
            self.config.labeler,
            client.as_deref(),
            self.config.theta,
        )?;
        let mut filtered = filter_offtopic(&assignment, &decisions, &self.taxonomy)?;

        let embedded: std::collections::HashSet<&str> = assignment.ids.iter().map(String::as_str).collect();
        let degenerate: Vec<String> = corpus
            .analyzed_comments()
            .filter(|c| !embedded.contains(c.comment_id.as_str()))
            .map(|c| c.comment_id.clone())
            .collect();
        let outside: Vec<String> = corpus
            .comments
            .iter()
            .filter(|c| !corpus.in_window(c))
            .map(|c| c.comment_id.clone())
            .collect();
        filtered.exclude_all(degenerate, ExclusionReason::DegenerateText);
        filtered.exclude_all(outside, ExclusionReason::OutOfWindow);

        let issues = self.taxonomy.names();
        let issue_of: BTreeMap<&str, &str> = filtered
            .labeled
            .iter()
            .map(|l| (l.comment_id.as_str(), issues[l.issue].as_str()))
            .collect();
        let cluster_rows: Vec<ClusterRow> = rows
            .into_iter()
            .map(|a| ClusterRow {
                issue: issue_of.get(a.comment_id.as_str()).map(|s| s.to_string()),
                assignment: a,
            })
            .collect();
        let table = salience_table_clusters(&filtered, &corpus, issues);

        manifest.count("labeled", filtered.labeled.len());
        manifest.count("excluded", filtered.excluded.len());
        for (class, n) in filtered.excluded_by_class() {
            manifest.count(&format!("excluded_{class}"), n);
        }
        write_labels_json(
            &self.path(LABELS_FILE),
            &LabelsFile {
                prompt_version: PROMPT_VERSION.into(),
                labeler: self.config.labeler,
                theta: self.config.theta,
                summaries,
                decisions,
            },
        )?;
        write_clusters_csv(&self.path(CLUSTERS_FILE), &cluster_rows)?;
        write_excluded_csv(&self.path(EXCLUDED_FILE), &filtered.excluded)?;
        write_counts_csv(&self.path(CLUSTER_COUNTS_FILE), &table)?;
        Ok(())
    }

    fn read_tables(&self) -> Result<(crate::keywords::SalienceTable, crate::keywords::SalienceTable), StageError> {
        let issues = self.taxonomy.names();
        let kw = read_counts_csv(&self.input(KEYWORD_COUNTS_FILE)?, MethodTag::KeywordMethod, issues.clone())?;
        let cl = read_counts_csv(&self.input(CLUSTER_COUNTS_FILE)?, MethodTag::ClusterMethod, issues)?;
        Ok((kw, cl))
    }

    fn stats(&self) -> Result<(), StageError> {
        let (kw, cl) = self.read_tables()?;
        write_stats_json(&self.path(STATS_FILE), &stats_report(&kw, &cl)?)?;
        Ok(())
    }

    fn report(&self) -> Result<(), StageError> {
        let (kw, cl) = self.read_tables()?;
        let rows = read_clusters_csv(&self.input(CLUSTERS_FILE)?)?;
        let corpus = self.load_corpus()?;
        emit_figures(&self.outdir, &kw, &cl, &rows, &corpus.window)?;
        Ok(())
    }
}

/// Reduces `matrix`, clamping `n_neighbors` below the point count. Fewer
/// than three points get an all-zero layout.
pub fn reduce_small_safe(matrix: &EmbeddingMatrix, cfg: &ReducerConfig) -> Result<LayoutEmbedding, ReduceError> {
    let n = matrix.len();
    if n < 3 {
        return Ok(LayoutEmbedding {
            ids: matrix.ids.clone(),
            coords: vec![vec![0.0; cfg.n_components]; n],
            config: cfg.clone(),
            spectral_init: true,
        });
    }
    let mut cfg = cfg.clone();
    cfg.n_neighbors = cfg.n_neighbors.min(n - 1);
    reduce(matrix, &cfg)
}

fn assignment_rows(
    corpus: &Corpus,
    assignment: &ClusterAssignment,
    plot: &EmbeddingMatrix,
) -> Result<Vec<AssignmentRow>, StageError> {
    let by_id: BTreeMap<&str, &crate::corpus::Comment> =
        corpus.comments.iter().map(|c| (c.comment_id.as_str(), c)).collect();
    assignment
        .ids
        .iter()
        .zip(&assignment.labels)
        .zip(&plot.rows)
        .map(|((id, &label), xy)| {
            let c = by_id
                .get(id.as_str())
                .ok_or_else(|| StageError::Inconsistent(format!("{id} is not in {CORPUS_FILE}")))?;
            Ok(AssignmentRow {
                comment_id: id.clone(),
                label,
                channel: c.channel.clone(),
                day: day_index(&c.published_at, &corpus.window)?,
                x2d: xy[0],
                y2d: xy.get(1).copied().unwrap_or(0.0),
            })
        })
        .collect()
}

/// Contents of `labels.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub prompt_version: String,
    pub labeler: LabelerMode,
    pub theta: f64,
    pub summaries: Vec<ClusterSummary>,
    pub decisions: Vec<LabelDecision>,
}

pub fn write_labels_json(path: &Path, labels: &LabelsFile) -> Result<(), StageError> {
    let mut text = serde_json::to_string_pretty(labels).expect("labels serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_labels_json(path: &Path) -> Result<LabelsFile, StageError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| StageError::Inconsistent(format!("{}: {e}", path.display())))
}

/// Validates `config` and runs every stage into `outdir`.
pub fn run_pipeline(config: RunConfig, outdir: &Path) -> Result<RunManifest, PipelineError> {
    Pipeline::new(config, outdir)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert!("nope".parse::<Stage>().is_err());
    }

    #[test]
    fn substreams_differ_by_name_and_seed() {
        assert_ne!(substream(1, "embed"), substream(1, "reduce"));
        assert_ne!(substream(1, "embed"), substream(2, "embed"));
        assert_eq!(substream(7, "x"), substream(7, "x"));
    }

    #[test]
    fn missing_taxonomy_is_a_config_error_naming_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            corpus: Some(dir.path().join("c.jsonl")),
            taxonomy: Some(dir.path().join("nope.json")),
            ..RunConfig::default()
        };
        let out = dir.path().join("out");
        let err = Pipeline::new(cfg, &out).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("nope.json"), "{err}");
        assert!(!out.exists());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = RunConfig::from_json(r#"{"corpus": "data/c.jsonl", "seed": 3}"#, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.corpus, Some(PathBuf::from("/cfg/data/c.jsonl")));
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.reduce_cluster.n_components, 5);
    }

    #[test]
    fn stage_without_predecessor_reports_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("c.jsonl");
        store_corpus(&crate::synthetic::fixture_corpus(1), &corpus).unwrap();
        let cfg = RunConfig {
            corpus: Some(corpus),
            ..RunConfig::default()
        };
        let p = Pipeline::new(cfg, dir.path().join("out")).unwrap();
        let err = p.run_stages(&[Stage::Stats]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let m = RunManifest::load(&p.path(MANIFEST_FILE)).unwrap();
        assert_eq!(m.status, "FAILED");
        assert_eq!(m.failed_stage, Some(Stage::Stats));
    }
}
