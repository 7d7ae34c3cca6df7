use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde_json::json;
use sha2::{Digest, Sha256};

use super::{LabelDecision, LabelOutcome, LabelSource, LlmError};
use crate::http::{HttpTransport, Request};
use crate::keywords::IssueTaxonomy;

pub trait ChatClient: Send + Sync {
    /// Sends one user message and returns the reply text.
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<C: ChatClient + ?Sized> ChatClient for &C {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

impl<C: ChatClient + ?Sized> ChatClient for Box<C> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

/// Chat-completion endpoint: `{model, messages}` in, first choice's content out.
pub struct HttpChatClient<T> {
    transport: T,
    path: String,
    model: String,
    api_key: Option<String>,
}

impl<T: HttpTransport> HttpChatClient<T> {
    pub fn new(transport: T, path: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        HttpChatClient {
            transport,
            path: path.into(),
            model: model.into(),
            api_key,
        }
    }

    pub fn request(&self, prompt: &str) -> Request {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let request = Request::post_json(self.path.clone(), &body);
        match &self.api_key {
            Some(key) => request.header("authorization", format!("Bearer {key}")),
            None => request,
        }
    }
}

impl<T: HttpTransport> ChatClient for HttpChatClient<T> {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let response = self
            .transport
            .send(&self.request(prompt))
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if response.status == 429 {
            return Err(LlmError::Quota(response.body));
        }
        if !response.is_success() {
            return Err(LlmError::Transport(format!("HTTP {}: {}", response.status, response.body)));
        }
        let value: serde_json::Value =
            serde_json::from_str(&response.body).map_err(|e| LlmError::Transport(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Transport("response has no choices[0].message.content".into()))
    }
}

pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Response cache keyed by prompt hash. Without a live client every miss is
/// an error; with one, misses are forwarded and recorded.
pub struct ReplayClient {
    dir: PathBuf,
    live: Option<Box<dyn ChatClient>>,
    live_calls: AtomicUsize,
}

impl ReplayClient {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        ReplayClient {
            dir: dir.into(),
            live: None,
            live_calls: AtomicUsize::new(0),
        }
    }

    pub fn recording(dir: impl Into<PathBuf>, live: Box<dyn ChatClient>) -> Self {
        ReplayClient {
            dir: dir.into(),
            live: Some(live),
            live_calls: AtomicUsize::new(0),
        }
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt_key(prompt)))
    }

    /// Stores `response` as the cached answer to `prompt`.
    pub fn store(&self, prompt: &str, response: &str) -> Result<PathBuf, LlmError> {
        fs::create_dir_all(&self.dir).map_err(|e| LlmError::Io(e.to_string()))?;
        let path = self.path_for(prompt);
        fs::write(&path, response).map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(path)
    }

    /// Requests that reached the live client.
    pub fn live_calls(&self) -> usize {
        self.live_calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let path = self.path_for(prompt);
        if let Ok(text) = fs::read_to_string(&path) {
            return Ok(text);
        }
        match &self.live {
            None => Err(LlmError::CacheMiss {
                key: prompt_key(prompt),
            }),
            Some(live) => {
                self.live_calls.fetch_add(1, Ordering::SeqCst);
                let text = live.complete(prompt)?;
                self.store(prompt, &text)?;
                Ok(text)
            }
        }
    }
}

/// Appended to the prompt for the single retry after an unparseable answer.
pub const STRICT_REMINDER: &str = "\n\nYour previous answer did not follow the required format. \
Reply with a single line containing only one of the listed category names, \
or NEW: followed by a short category name.";

/// Reads the first nonempty line of an answer against the answer grammar.
pub fn parse_response(raw: &str, taxonomy: &IssueTaxonomy) -> Option<LabelOutcome> {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty())?;
    if let Some(i) = taxonomy.index_of(line) {
        return Some(LabelOutcome::Predefined(taxonomy.issues[i].name.clone()));
    }
    let (head, rest) = line.split_once(':')?;
    if head.trim().eq_ignore_ascii_case("new") {
        let name = rest.trim();
        if !name.is_empty() {
            return Some(LabelOutcome::NewCategory(name.to_string()));
        }
    }
    None
}

/// Asks once, retries once with [`STRICT_REMINDER`], then gives up with
/// [`LlmError::ParseFailure`].
pub fn llm_label(
    client: &dyn ChatClient,
    prompt: &str,
    taxonomy: &IssueTaxonomy,
    cluster_id: usize,
) -> Result<LabelDecision, LlmError> {
    let first = client.complete(prompt)?;
    if let Some(outcome) = parse_response(&first, taxonomy) {
        return Ok(LabelDecision {
            cluster_id,
            outcome,
            source: LabelSource::Llm,
            raw_response: first,
        });
    }
    let second = client.complete(&format!("{prompt}{STRICT_REMINDER}"))?;
    match parse_response(&second, taxonomy) {
        Some(outcome) => Ok(LabelDecision {
            cluster_id,
            outcome,
            source: LabelSource::Llm,
            raw_response: second,
        }),
        None => Err(LlmError::ParseFailure {
            raw: format!("{first}\n---\n{second}"),
        }),
    }
}
