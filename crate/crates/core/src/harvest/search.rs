//! Programmatic search through configurable engine adapters.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::{get_with_retry, HttpClient, RetryPolicy};
use super::url::{host_matches, normalize_url};
use crate::protocol::{EngineKind, ReviewProtocol};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultRecord {
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub rank: usize,
    pub engine_id: String,
    pub query: String,
}

/// One result as returned by an engine, before normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawHit {
    pub url: String,
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("engine {engine_id}: transport failure after retries: {message}")]
    Transport { engine_id: String, message: String },
    #[error("engine {engine_id}: malformed response ({reason}): {excerpt}")]
    Malformed {
        engine_id: String,
        reason: String,
        excerpt: String,
    },
    #[error("engine {engine_id}: credential variable {env} is not set")]
    MissingCredential { engine_id: String, env: String },
    #[error("engine {engine_id}: cannot read fixture {path}: {message}")]
    Fixture {
        engine_id: String,
        path: String,
        message: String,
    },
}

fn excerpt(s: &str) -> String {
    const MAX: usize = 200;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

pub trait SearchEngine: Send + Sync {
    fn engine_id(&self) -> &str;
    /// Returns at most `max_results` hits for `query` in rank order.
    fn search(&self, query: &str, max_results: usize) -> Result<Vec<RawHit>, SearchError>;
}

/// Serves results from a local JSON file.
///
/// The file is an array of `{url, title, snippet}` objects in rank order,
/// returned for every query, or an object mapping query strings to such
/// arrays.
pub struct FixtureEngine {
    engine_id: String,
    all: Option<Vec<RawHit>>,
    by_query: BTreeMap<String, Vec<RawHit>>,
}

impl FixtureEngine {
    pub fn load(engine_id: &str, path: &Path) -> Result<Self, SearchError> {
        let text = std::fs::read_to_string(path).map_err(|e| SearchError::Fixture {
            engine_id: engine_id.to_string(),
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(engine_id, &text)
    }

    pub fn from_json(engine_id: &str, text: &str) -> Result<Self, SearchError> {
        let malformed = |reason: String, excerpt_of: &str| SearchError::Malformed {
            engine_id: engine_id.to_string(),
            reason,
            excerpt: excerpt(excerpt_of),
        };
        let value: Value =
            serde_json::from_str(text).map_err(|e| malformed(e.to_string(), text))?;
        let parse_list = |v: &Value| -> Result<Vec<RawHit>, SearchError> {
            let items = v
                .as_array()
                .ok_or_else(|| malformed("expected an array of results".into(), &v.to_string()))?;
            items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let url = item.get("url").and_then(Value::as_str).ok_or_else(|| {
                        malformed(format!("result {i} has no url field"), &item.to_string())
                    })?;
                    let text_field = |k: &str| {
                        item.get(k)
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string()
                    };
                    Ok(RawHit {
                        url: url.to_string(),
                        title: text_field("title"),
                        snippet: text_field("snippet"),
                    })
                })
                .collect()
        };
        match &value {
            Value::Array(_) => Ok(Self {
                engine_id: engine_id.to_string(),
                all: Some(parse_list(&value)?),
                by_query: BTreeMap::new(),
            }),
            Value::Object(map) => {
                let mut by_query = BTreeMap::new();
                for (q, list) in map {
                    by_query.insert(q.clone(), parse_list(list)?);
                }
                Ok(Self {
                    engine_id: engine_id.to_string(),
                    all: None,
                    by_query,
                })
            }
            other => Err(malformed(
                "expected an array or an object keyed by query".into(),
                &other.to_string(),
            )),
        }
    }
}

impl SearchEngine for FixtureEngine {
    fn engine_id(&self) -> &str {
        &self.engine_id
    }

    fn search(&self, query: &str, max_results: usize) -> Result<Vec<RawHit>, SearchError> {
        let list = match &self.all {
            Some(all) => all.as_slice(),
            None => self.by_query.get(query).map(Vec::as_slice).unwrap_or_default(),
        };
        Ok(list.iter().take(max_results).cloned().collect())
    }
}

/// A generic JSON REST search API driven by a URL template and JSON
/// pointers into the response.
pub struct JsonRestEngine {
    engine_id: String,
    url_template: String,
    credential: Option<String>,
    results_pointer: String,
    url_pointer: String,
    title_pointer: Option<String>,
    snippet_pointer: Option<String>,
    page_size: usize,
    client: Arc<dyn HttpClient>,
    retry: RetryPolicy,
}

impl JsonRestEngine {
    /// Builds the adapter from protocol config, resolving the credential
    /// from the environment.
    pub fn from_config(
        engine_id: &str,
        kind: &EngineKind,
        client: Arc<dyn HttpClient>,
        retry: RetryPolicy,
    ) -> Result<Self, SearchError> {
        let EngineKind::JsonRest {
            url_template,
            credential_env,
            results_pointer,
            url_pointer,
            title_pointer,
            snippet_pointer,
            page_size,
        } = kind
        else {
            panic!("JsonRestEngine::from_config called with a fixture config");
        };
        let credential = match credential_env {
            Some(env) => Some(std::env::var(env).map_err(|_| SearchError::MissingCredential {
                engine_id: engine_id.to_string(),
                env: env.clone(),
            })?),
            None => None,
        };
        Ok(Self {
            engine_id: engine_id.to_string(),
            url_template: url_template.clone(),
            credential,
            results_pointer: results_pointer.clone(),
            url_pointer: url_pointer.clone(),
            title_pointer: title_pointer.clone(),
            snippet_pointer: snippet_pointer.clone(),
            page_size: (*page_size).max(1),
            client,
            retry,
        })
    }

    /// Request URL for a zero-based page index.
    pub fn request_url(&self, query: &str, page: usize) -> String {
        let encode = |s: &str| url::form_urlencoded::byte_serialize(s.as_bytes()).collect::<String>();
        let mut out = self
            .url_template
            .replace("{query}", &encode(query))
            .replace("{page}", &(page + 1).to_string())
            .replace("{start}", &(page * self.page_size + 1).to_string())
            .replace("{count}", &self.page_size.to_string());
        if let Some(c) = &self.credential {
            out = out.replace("{credential}", &encode(c));
        }
        out
    }

    fn parse_page(&self, body: &str) -> Result<Vec<RawHit>, SearchError> {
        let malformed = |reason: String| SearchError::Malformed {
            engine_id: self.engine_id.clone(),
            reason,
            excerpt: excerpt(body),
        };
        let value: Value = serde_json::from_str(body).map_err(|e| malformed(e.to_string()))?;
        let Some(results) = value.pointer(&self.results_pointer) else {
            // Many APIs omit the result array entirely when a page is empty.
            return Ok(Vec::new());
        };
        let items = results
            .as_array()
            .ok_or_else(|| malformed(format!("{} is not an array", self.results_pointer)))?;
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let url = item
                    .pointer(&self.url_pointer)
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed(format!("result {i} has no {}", self.url_pointer)))?;
                let field = |p: &Option<String>| {
                    p.as_deref()
                        .and_then(|p| item.pointer(p))
                        .and_then(Value::as_str)
                        .unwrap_or_default()
                        .to_string()
                };
                Ok(RawHit {
                    url: url.to_string(),
                    title: field(&self.title_pointer),
                    snippet: field(&self.snippet_pointer),
                })
            })
            .collect()
    }
}

impl SearchEngine for JsonRestEngine {
    fn engine_id(&self) -> &str {
        &self.engine_id
    }

    fn search(&self, query: &str, max_results: usize) -> Result<Vec<RawHit>, SearchError> {
        let mut hits = Vec::new();
        let max_pages = max_results.div_ceil(self.page_size);
        for page in 0..max_pages {
            let url = self.request_url(query, page);
            let attempted = get_with_retry(self.client.as_ref(), &url, self.retry, || {});
            let response = attempted.result.map_err(|e| SearchError::Transport {
                engine_id: self.engine_id.clone(),
                message: e.0,
            })?;
            if !response.is_success() {
                return Err(SearchError::Transport {
                    engine_id: self.engine_id.clone(),
                    message: format!("HTTP {}: {}", response.status, excerpt(&response.body)),
                });
            }
            let page_hits = self.parse_page(&response.body)?;
            let short = page_hits.len() < self.page_size;
            hits.extend(page_hits);
            if short || hits.len() >= max_results {
                break;
            }
        }
        hits.truncate(max_results);
        Ok(hits)
    }
}

pub type Engines = Vec<Box<dyn SearchEngine>>;

/// Instantiates the protocol's engines. In offline mode json-rest engines
/// are skipped and reported in the returned warnings.
pub fn build_engines(
    protocol: &ReviewProtocol,
    base_dir: &Path,
    offline: bool,
    client: Arc<dyn HttpClient>,
) -> Result<(Engines, Vec<String>), SearchError> {
    let retry = RetryPolicy {
        max_retries: protocol.fetch.max_retries,
        backoff_base: Duration::from_millis(protocol.fetch.backoff_base_ms),
    };
    let mut engines: Vec<Box<dyn SearchEngine>> = Vec::new();
    let mut warnings = Vec::new();
    for cfg in &protocol.search.engines {
        match &cfg.kind {
            EngineKind::Fixture { path } => {
                engines.push(Box::new(FixtureEngine::load(&cfg.engine_id, &base_dir.join(path))?));
            }
            kind @ EngineKind::JsonRest { .. } => {
                if offline {
                    warnings.push(format!("engine {} skipped in offline mode", cfg.engine_id));
                    continue;
                }
                engines.push(Box::new(JsonRestEngine::from_config(
                    &cfg.engine_id,
                    kind,
                    client.clone(),
                    retry,
                )?));
            }
        }
    }
    Ok((engines, warnings))
}

#[derive(Clone, Debug, Default)]
pub struct SearchOutcome {
    /// Deduplicated records sorted by url.
    pub records: Vec<SearchResultRecord>,
    /// Normalized URLs retrieved by each query string across all engines.
    pub per_query: BTreeMap<String, BTreeSet<String>>,
    pub warnings: Vec<String>,
}

/// Runs every query on every engine, normalizes and filters URLs, and keeps
/// the lowest-ranked record per URL.
pub fn run_search(
    protocol: &ReviewProtocol,
    engines: &[Box<dyn SearchEngine>],
) -> Result<SearchOutcome, SearchError> {
    let strategy = &protocol.search;
    let mut best: BTreeMap<String, SearchResultRecord> = BTreeMap::new();
    let mut outcome = SearchOutcome::default();

    for query in &strategy.query_strings {
        let retrieved = outcome.per_query.entry(query.clone()).or_default();
        for engine in engines {
            let hits = engine.search(query, strategy.max_results_per_query)?;
            for (i, hit) in hits.into_iter().enumerate() {
                let url = match normalize_url(&hit.url) {
                    Ok(u) => u,
                    Err(e) => {
                        outcome
                            .warnings
                            .push(format!("engine {}: skipped {e}", engine.engine_id()));
                        continue;
                    }
                };
                if let Some(filters) = &strategy.site_filters {
                    if !filters.iter().any(|f| host_matches(&url, f)) {
                        continue;
                    }
                }
                retrieved.insert(url.clone());
                let record = SearchResultRecord {
                    url: url.clone(),
                    title: hit.title,
                    snippet: hit.snippet,
                    rank: i + 1,
                    engine_id: engine.engine_id().to_string(),
                    query: query.clone(),
                };
                match best.get(&url) {
                    Some(existing) if existing.rank <= record.rank => {}
                    _ => {
                        best.insert(url, record);
                    }
                }
            }
        }
    }
    outcome.records = best.into_values().collect();
    Ok(outcome)
}
