//! Issue salience in social-media comments, measured two ways.
//!
//! The keyword method normalizes comment text and counts occurrences of a
//! fixed issue taxonomy per (day, channel). The cluster method embeds each
//! comment, reduces the embeddings with a UMAP-style layout, clusters them
//! with HDBSCAN, summarizes clusters by TF-IDF and labels them against the
//! same taxonomy (through an LLM or a deterministic fallback). Both methods
//! produce [`keywords::SalienceTable`]s that [`analyze`] compares with
//! chi-square goodness-of-fit tests and rank agreement.
//!
//! Every stage is deterministic for a fixed seed and reads and writes
//! documented file formats, see [`pipeline`].

pub mod analyze;
pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod http;
pub mod keywords;
pub mod labeling;
pub mod pipeline;
pub mod reduce;
pub mod report;
pub mod synthetic;
pub mod textprep;
