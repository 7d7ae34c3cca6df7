//! Sentence embeddings behind a provider interface, plus the matrix file format.
//!
//! Providers: [`FallbackProvider`] (hashed character n-grams, offline and
//! deterministic), [`PrecomputedProvider`] (vectors computed elsewhere) and
//! [`RemoteProvider`] (`POST {"texts": [...]}` -> `{"vectors": [[...]]}`).
//!
//! Matrix file: one JSON header line `{provider, dim, count, checksum}`
//! followed by `id<TAB>base64(little-endian f32 values)` per row. The
//! checksum is the hex SHA-256 of the row lines, newlines included.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::http::{HttpTransport, Request};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("provider {provider} failed on id {id}: {message}")]
    Provider {
        provider: String,
        id: String,
        message: String,
    },
    #[error("dimension mismatch: expected {expected}, got {got} for id {id}")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        id: String,
    },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding file format error at line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Vector plus a flag for inputs that produced no features.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Row-major matrix keyed by comment id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provider_name: String,
    pub dim: usize,
}

impl EmbeddingMatrix {
    pub fn empty(provider_name: impl Into<String>, dim: usize) -> Self {
        EmbeddingMatrix {
            ids: Vec::new(),
            rows: Vec::new(),
            provider_name: provider_name.into(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        let mut seen = HashSet::new();
        for (id, row) in self.ids.iter().zip(&self.rows) {
            if !seen.insert(id) {
                return Err(EmbedError::DuplicateId(id.clone()));
            }
            if row.len() != self.dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.dim,
                    got: row.len(),
                    id: id.clone(),
                });
            }
        }
        if self.ids.len() != self.rows.len() {
            return Err(EmbedError::Format {
                line: 0,
                message: format!("{} ids but {} rows", self.ids.len(), self.rows.len()),
            });
        }
        Ok(())
    }

    /// Values rounded through f32, i.e. exactly what a store/load round trip yields.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            for x in row.iter_mut() {
                *x = *x as f32 as f64;
            }
        }
        out
    }
}

pub trait EmbeddingProvider {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// One vector per `(id, text)` item, in input order.
    fn embed(&self, items: &[(String, String)]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Embeds `items` and L2-normalizes every row.
pub fn embed_batch(
    provider: &dyn EmbeddingProvider,
    items: &[(String, String)],
) -> Result<EmbeddingMatrix, EmbedError> {
    let dim = provider.dim();
    let mut seen = HashSet::new();
    for (id, _) in items {
        if !seen.insert(id.as_str()) {
            return Err(EmbedError::DuplicateId(id.clone()));
        }
    }
    if items.is_empty() {
        return Ok(EmbeddingMatrix::empty(provider.name(), dim));
    }
    let vectors = provider.embed(items)?;
    if vectors.len() != items.len() {
        return Err(EmbedError::Provider {
            provider: provider.name(),
            id: items[vectors.len().min(items.len() - 1)].0.clone(),
            message: format!("returned {} vectors for {} inputs", vectors.len(), items.len()),
        });
    }
    let mut rows = Vec::with_capacity(items.len());
    for ((id, _), mut v) in items.iter().zip(vectors) {
        if v.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                got: v.len(),
                id: id.clone(),
            });
        }
        let norm = l2_norm(&v);
        if !norm.is_finite() || norm == 0.0 {
            return Err(EmbedError::Provider {
                provider: provider.name(),
                id: id.clone(),
                message: "zero or non-finite vector".into(),
            });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        rows.push(v);
    }
    Ok(EmbeddingMatrix {
        ids: items.iter().map(|(id, _)| id.clone()).collect(),
        rows,
        provider_name: provider.name(),
        dim,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackConfig {
    pub dim: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub seed: u64,
}

impl Default for FallbackConfig {
    fn default() -> Self {
        FallbackConfig {
            dim: 256,
            ngram_min: 3,
            ngram_max: 5,
            seed: 0x5A11E4CE,
        }
    }
}

impl FallbackConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim < 8 {
            return Err(format!("fallback dim must be >= 8, got {}", self.dim));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(format!(
                "invalid n-gram range {}..={}",
                self.ngram_min, self.ngram_max
            ));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over `bytes` starting from a seed-dependent basis, finalized with splitmix64.
fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(h)
}

/// Signed feature hashing of all character n-grams of the lowercased text.
/// The lowest hash bit picks the sign, the remaining bits the bucket.
pub fn fallback_embed(text: &str, cfg: &FallbackConfig) -> EmbeddingVector {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut values = vec![0.0; cfg.dim];
    let mut buf = String::new();
    for n in cfg.ngram_min..=cfg.ngram_max {
        if chars.len() < n {
            break;
        }
        for window in chars.windows(n) {
            buf.clear();
            buf.extend(window);
            let h = seeded_hash(buf.as_bytes(), cfg.seed);
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            let bucket = ((h >> 1) % cfg.dim as u64) as usize;
            values[bucket] += sign;
        }
    }
    let norm = l2_norm(&values);
    if norm == 0.0 {
        return EmbeddingVector {
            values,
            degenerate: true,
        };
    }
    values.iter_mut().for_each(|x| *x /= norm);
    EmbeddingVector {
        values,
        degenerate: false,
    }
}

#[derive(Debug, Clone)]
pub struct FallbackProvider {
    pub config: FallbackConfig,
}

impl FallbackProvider {
    pub fn new(config: FallbackConfig) -> Self {
        FallbackProvider { config }
    }
}

impl EmbeddingProvider for FallbackProvider {
    fn name(&self) -> String {
        format!(
            "fallback:ngram{}-{}:dim{}:seed{}",
            self.config.ngram_min, self.config.ngram_max, self.config.dim, self.config.seed
        )
    }

    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, items: &[(String, String)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        items
            .iter()
            .map(|(id, text)| {
                let v = fallback_embed(text, &self.config);
                if v.degenerate {
                    Err(EmbedError::Provider {
                        provider: self.name(),
                        id: id.clone(),
                        message: "text has no character n-grams".into(),
                    })
                } else {
                    Ok(v.values)
                }
            })
            .collect()
    }
}

/// Serves rows of a matrix computed elsewhere, looked up by id.
#[derive(Debug, Clone)]
pub struct PrecomputedProvider {
    matrix: EmbeddingMatrix,
    index: HashMap<String, usize>,
}

impl PrecomputedProvider {
    pub fn new(matrix: EmbeddingMatrix) -> Self {
        let index = matrix
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        PrecomputedProvider { matrix, index }
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Ok(Self::new(read_matrix(path)?))
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn name(&self) -> String {
        format!("precomputed:{}", self.matrix.provider_name)
    }

    fn dim(&self) -> usize {
        self.matrix.dim
    }

    fn embed(&self, items: &[(String, String)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        items
            .iter()
            .map(|(id, _)| {
                self.index
                    .get(id)
                    .map(|&i| self.matrix.rows[i].clone())
                    .ok_or_else(|| EmbedError::Provider {
                        provider: self.name(),
                        id: id.clone(),
                        message: "id not present in precomputed matrix".into(),
                    })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f64>>,
}

/// HTTP embedding service speaking `{"texts": [...]}` -> `{"vectors": [...]}`.
pub struct RemoteProvider<T> {
    transport: T,
    path: String,
    dim: usize,
    batch_size: usize,
    api_key: Option<String>,
}

impl<T: HttpTransport> RemoteProvider<T> {
    pub fn new(transport: T, path: impl Into<String>, dim: usize) -> Self {
        RemoteProvider {
            transport,
            path: path.into(),
            dim,
            batch_size: 64,
            api_key: None,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }
}

impl<T: HttpTransport> EmbeddingProvider for RemoteProvider<T> {
    fn name(&self) -> String {
        format!("remote:{}", self.path)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, items: &[(String, String)]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(self.batch_size) {
            let fail = |message: String| EmbedError::Provider {
                provider: self.name(),
                id: chunk[0].0.clone(),
                message,
            };
            let body = serde_json::to_value(RemoteRequest {
                texts: chunk.iter().map(|(_, t)| t.as_str()).collect(),
            })
            .map_err(|e| fail(e.to_string()))?;
            let mut request = Request::post_json(self.path.clone(), &body);
            if let Some(key) = &self.api_key {
                request = request.header("authorization", format!("Bearer {key}"));
            }
            let response = self.transport.send(&request).map_err(|e| fail(e.to_string()))?;
            if !response.is_success() {
                return Err(fail(format!("HTTP {}: {}", response.status, response.body)));
            }
            let parsed: RemoteResponse =
                serde_json::from_str(&response.body).map_err(|e| fail(e.to_string()))?;
            if parsed.vectors.len() != chunk.len() {
                return Err(fail(format!(
                    "sent {} texts, received {} vectors",
                    chunk.len(),
                    parsed.vectors.len()
                )));
            }
            out.extend(parsed.vectors);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub provider: String,
    pub dim: usize,
    pub count: usize,
    pub checksum: String,
}

fn encode_row(row: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(row.len() * 4);
    for &x in row {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_row(s: &str, dim: usize, line: usize) -> Result<Vec<f64>, EmbedError> {
    let bytes = BASE64.decode(s.trim()).map_err(|e| EmbedError::Format {
        line,
        message: e.to_string(),
    })?;
    if bytes.len() != dim * 4 {
        return Err(EmbedError::Format {
            line,
            message: format!("expected {} bytes, got {}", dim * 4, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Serializes the matrix in the container format.
pub fn matrix_to_string(matrix: &EmbeddingMatrix) -> Result<String, EmbedError> {
    matrix.validate()?;
    let mut body = String::new();
    for (id, row) in matrix.ids.iter().zip(&matrix.rows) {
        if id.contains(['\t', '\n', '\r']) {
            return Err(EmbedError::Format {
                line: 0,
                message: format!("id {id:?} contains a tab or newline"),
            });
        }
        body.push_str(id);
        body.push('\t');
        body.push_str(&encode_row(row));
        body.push('\n');
    }
    let header = MatrixHeader {
        provider: matrix.provider_name.clone(),
        dim: matrix.dim,
        count: matrix.len(),
        checksum: hex::encode(Sha256::digest(body.as_bytes())),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    out.push_str(&body);
    Ok(out)
}

pub fn write_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), EmbedError> {
    let text = matrix_to_string(matrix)?;
    let io = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

pub fn parse_matrix(text: &str) -> Result<EmbeddingMatrix, EmbedError> {
    let (header_line, body) = text.split_once('\n').unwrap_or((text, ""));
    let header: MatrixHeader =
        serde_json::from_str(header_line).map_err(|e| EmbedError::Format {
            line: 1,
            message: e.to_string(),
        })?;
    let checksum = hex::encode(Sha256::digest(body.as_bytes()));
    if checksum != header.checksum {
        return Err(EmbedError::Format {
            line: 1,
            message: format!("checksum mismatch: header {}, body {checksum}", header.checksum),
        });
    }
    let mut ids = Vec::with_capacity(header.count);
    let mut rows = Vec::with_capacity(header.count);
    for (i, line) in body.lines().enumerate() {
        let line_no = i + 2;
        let (id, data) = line.split_once('\t').ok_or_else(|| EmbedError::Format {
            line: line_no,
            message: "missing tab separator".into(),
        })?;
        ids.push(id.to_string());
        rows.push(decode_row(data, header.dim, line_no)?);
    }
    if ids.len() != header.count {
        return Err(EmbedError::Format {
            line: 1,
            message: format!("header count {} but {} rows", header.count, ids.len()),
        });
    }
    let matrix = EmbeddingMatrix {
        ids,
        rows,
        provider_name: header.provider,
        dim: header.dim,
    };
    matrix.validate()?;
    Ok(matrix)
}

pub fn read_matrix(path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text)
}
