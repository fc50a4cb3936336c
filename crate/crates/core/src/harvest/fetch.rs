//! Polite page fetching, snapshot replay and the `WebDocument` record.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use texting_robots::Robot;

use super::html::extract_text;
use super::http::{get_with_retry, HttpClient, RetryPolicy};
use super::search::SearchResultRecord;
use super::url::host_key;
use crate::corpus::Tokenizer;
use crate::protocol::FetchConfig;

/// Fetch outcome of one document. Anything but `Ok` is excluded downstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocStatus {
    #[serde(rename = "ok")]
    Ok,
    #[serde(rename = "http-error")]
    HttpError,
    #[serde(rename = "transport-error")]
    TransportError,
    #[serde(rename = "skipped:robots")]
    SkippedRobots,
    #[serde(rename = "skipped:offline")]
    SkippedOffline,
}

impl DocStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DocStatus::Ok => "ok",
            DocStatus::HttpError => "http-error",
            DocStatus::TransportError => "transport-error",
            DocStatus::SkippedRobots => "skipped:robots",
            DocStatus::SkippedOffline => "skipped:offline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebDocument {
    pub doc_id: String,
    pub url: String,
    pub fetched_at: DateTime<Utc>,
    pub http_status: u16,
    pub status: DocStatus,
    pub raw_html: String,
    pub plain_text: String,
    pub title: String,
    pub token_count: usize,
}

impl WebDocument {
    /// Builds a document from a response body. Non-2xx responses keep the
    /// body but get empty text and an `HttpError` status.
    pub fn from_response(
        url: &str,
        http_status: u16,
        raw_html: String,
        fetched_at: DateTime<Utc>,
        tokenizer: &Tokenizer,
    ) -> Self {
        if !(200..300).contains(&http_status) {
            let mut doc = Self::flagged(url, DocStatus::HttpError, fetched_at);
            doc.http_status = http_status;
            doc.raw_html = raw_html;
            return doc;
        }
        let (title, plain_text) = extract_text(&raw_html);
        let token_count = tokenizer.tokenize(&plain_text).tokens.len();
        Self {
            doc_id: doc_id(url),
            url: url.to_string(),
            fetched_at,
            http_status,
            status: DocStatus::Ok,
            raw_html,
            plain_text,
            title,
            token_count,
        }
    }

    pub fn flagged(url: &str, status: DocStatus, fetched_at: DateTime<Utc>) -> Self {
        Self {
            doc_id: doc_id(url),
            url: url.to_string(),
            fetched_at,
            http_status: 0,
            status,
            raw_html: String::new(),
            plain_text: String::new(),
            title: String::new(),
            token_count: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == DocStatus::Ok
    }
}

/// Stable document identifier: the first 16 hex digits of the SHA-256 of
/// the normalized URL.
pub fn doc_id(normalized_url: &str) -> String {
    let digest = Sha256::digest(normalized_url.as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub attempted: usize,
    pub ok: usize,
    pub failures: Vec<FetchFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchFailure {
    pub url: String,
    pub status: DocStatus,
    pub http_status: u16,
}

impl FetchSummary {
    pub fn from_documents(docs: &[WebDocument]) -> Self {
        Self {
            attempted: docs.len(),
            ok: docs.iter().filter(|d| d.is_ok()).count(),
            failures: docs
                .iter()
                .filter(|d| !d.is_ok())
                .map(|d| FetchFailure {
                    url: d.url.clone(),
                    status: d.status,
                    http_status: d.http_status,
                })
                .collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("invalid politeness config: {0}")]
    Config(String),
    #[error("snapshot index {path}: {message}")]
    Snapshot { path: String, message: String },
}

fn check_config(cfg: &FetchConfig) -> Result<(), FetchError> {
    if cfg.user_agent.trim().is_empty() {
        return Err(FetchError::Config("user_agent is empty".into()));
    }
    if cfg.max_concurrent_hosts == 0 {
        return Err(FetchError::Config("max_concurrent_hosts must be >= 1".into()));
    }
    if cfg.timeout_ms == 0 {
        return Err(FetchError::Config("timeout_ms must be > 0".into()));
    }
    Ok(())
}

/// Enforces a minimum gap between consecutive requests to one host.
struct HostPacer {
    delay: Duration,
    next_allowed: Option<Instant>,
}

impl HostPacer {
    fn wait_turn(&mut self) {
        if let Some(at) = self.next_allowed {
            let now = Instant::now();
            if at > now {
                std::thread::sleep(at - now);
            }
        }
        self.next_allowed = Some(Instant::now() + self.delay);
    }
}

enum RobotsPolicy {
    AllowAll,
    DisallowAll,
    Rules(Box<Robot>),
}

impl RobotsPolicy {
    fn allows(&self, url: &str) -> bool {
        match self {
            RobotsPolicy::AllowAll => true,
            RobotsPolicy::DisallowAll => false,
            RobotsPolicy::Rules(robot) => robot.allowed(url),
        }
    }

    fn crawl_delay(&self) -> Option<Duration> {
        match self {
            RobotsPolicy::Rules(robot) => robot
                .delay
                .filter(|d| d.is_finite() && *d > 0.0)
                .map(|d| Duration::from_secs_f32(d.min(60.0))),
            _ => None,
        }
    }
}

fn product_token(user_agent: &str) -> &str {
    user_agent.split('/').next().unwrap_or(user_agent).trim()
}

fn robots_url(page_url: &str) -> Option<String> {
    let mut u = url::Url::parse(page_url).ok()?;
    u.set_path("/robots.txt");
    u.set_query(None);
    u.set_fragment(None);
    Some(u.to_string())
}

fn load_robots(
    client: &dyn HttpClient,
    page_url: &str,
    agent: &str,
    retry: RetryPolicy,
    pacer: &mut HostPacer,
) -> RobotsPolicy {
    let Some(url) = robots_url(page_url) else {
        return RobotsPolicy::AllowAll;
    };
    let attempted = get_with_retry(client, &url, retry, || pacer.wait_turn());
    match attempted.result {
        Ok(r) if r.is_success() => match Robot::new(agent, r.body.as_bytes()) {
            Ok(robot) => RobotsPolicy::Rules(Box::new(robot)),
            Err(e) => {
                log::warn!("unparseable robots file at {url}: {e}; allowing all");
                RobotsPolicy::AllowAll
            }
        },
        Ok(r) if (400..500).contains(&r.status) => RobotsPolicy::AllowAll,
        Ok(r) => {
            log::warn!("robots file at {url} answered {}; treating host as disallowed", r.status);
            RobotsPolicy::DisallowAll
        }
        Err(e) => {
            log::warn!("robots file at {url} unreachable ({e}); treating host as disallowed");
            RobotsPolicy::DisallowAll
        }
    }
}

fn fetch_host(
    records: &[&SearchResultRecord],
    cfg: &FetchConfig,
    client: &dyn HttpClient,
    tokenizer: &Tokenizer,
) -> Vec<WebDocument> {
    let retry = RetryPolicy {
        max_retries: cfg.max_retries,
        backoff_base: Duration::from_millis(cfg.backoff_base_ms),
    };
    let mut pacer = HostPacer {
        delay: Duration::from_millis(cfg.min_delay_ms),
        next_allowed: None,
    };
    let robots = match records.first() {
        Some(first) if cfg.honor_robots => load_robots(
            client,
            &first.url,
            product_token(&cfg.user_agent),
            retry,
            &mut pacer,
        ),
        _ => RobotsPolicy::AllowAll,
    };
    if let Some(d) = robots.crawl_delay() {
        pacer.delay = pacer.delay.max(d);
    }

    records
        .iter()
        .map(|rec| {
            if !robots.allows(&rec.url) {
                return WebDocument::flagged(&rec.url, DocStatus::SkippedRobots, Utc::now());
            }
            let attempted = get_with_retry(client, &rec.url, retry, || pacer.wait_turn());
            match attempted.result {
                Ok(resp) => {
                    WebDocument::from_response(&rec.url, resp.status, resp.body, Utc::now(), tokenizer)
                }
                Err(e) => {
                    log::warn!("{}: {e} after {} attempts", rec.url, attempted.attempts);
                    WebDocument::flagged(&rec.url, DocStatus::TransportError, Utc::now())
                }
            }
        })
        .collect()
}

/// Fetches every record over HTTP.
///
/// Hosts are processed concurrently (up to `max_concurrent_hosts`) while
/// requests to one host are serialized with at least `min_delay_ms` (or the
/// robots crawl delay, if larger) between them. Per-document failures are
/// recorded in the returned documents; the output is sorted by url.
pub fn fetch_documents(
    records: &[SearchResultRecord],
    cfg: &FetchConfig,
    client: &dyn HttpClient,
    tokenizer: &Tokenizer,
) -> Result<(Vec<WebDocument>, FetchSummary), FetchError> {
    check_config(cfg)?;

    let mut groups: BTreeMap<String, Vec<&SearchResultRecord>> = BTreeMap::new();
    for rec in records {
        let host = host_key(&rec.url).unwrap_or_default();
        groups.entry(host).or_default().push(rec);
    }
    let queue = Mutex::new(groups.into_values().collect::<Vec<_>>());
    let results = Mutex::new(Vec::with_capacity(records.len()));
    let workers = cfg.max_concurrent_hosts.min(records.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some(group) = queue.lock().expect("queue lock").pop() else {
                    break;
                };
                let docs = fetch_host(&group, cfg, client, tokenizer);
                results.lock().expect("results lock").extend(docs);
            });
        }
    });

    let mut docs = results.into_inner().expect("results lock");
    docs.sort_by(|a, b| a.url.cmp(&b.url));
    let summary = FetchSummary::from_documents(&docs);
    Ok((docs, summary))
}

#[derive(Clone, Debug, Deserialize)]
struct SnapshotEntry {
    url: String,
    file: String,
    #[serde(default = "default_snapshot_status")]
    status: u16,
    #[serde(default)]
    fetched_at: Option<DateTime<Utc>>,
}

fn default_snapshot_status() -> u16 {
    200
}

/// Previously captured pages, keyed by normalized URL.
///
/// A snapshot directory holds `index.json` (an array of `{url, file,
/// status?, fetched_at?}`) next to the captured HTML files.
pub struct SnapshotSet {
    pages: HashMap<String, (u16, DateTime<Utc>, String)>,
}

impl SnapshotSet {
    pub fn load(dir: &Path) -> Result<Self, FetchError> {
        let index_path = dir.join("index.json");
        let err = |message: String| FetchError::Snapshot {
            path: index_path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(&index_path).map_err(|e| err(e.to_string()))?;
        let entries: Vec<SnapshotEntry> =
            serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        let mut pages = HashMap::new();
        for entry in entries {
            let url = super::url::normalize_url(&entry.url).map_err(|e| err(e.to_string()))?;
            let html = std::fs::read_to_string(dir.join(&entry.file))
                .map_err(|e| err(format!("{}: {e}", entry.file)))?;
            let at = entry.fetched_at.unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
            pages.insert(url, (entry.status, at, html));
        }
        Ok(Self { pages })
    }

    pub fn empty() -> Self {
        Self {
            pages: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

/// Resolves records without network access: a successful document already
/// in `existing` is reused, then snapshots are consulted, and anything else
/// is flagged `skipped:offline`.
pub fn replay_documents(
    records: &[SearchResultRecord],
    snapshots: &SnapshotSet,
    existing: &BTreeMap<String, WebDocument>,
    tokenizer: &Tokenizer,
) -> (Vec<WebDocument>, FetchSummary) {
    let mut docs: Vec<WebDocument> = records
        .iter()
        .map(|rec| {
            if let Some(doc) = existing.get(&rec.url).filter(|d| d.is_ok()) {
                return doc.clone();
            }
            match snapshots.pages.get(&rec.url) {
                Some((status, at, html)) => {
                    WebDocument::from_response(&rec.url, *status, html.clone(), *at, tokenizer)
                }
                None => WebDocument::flagged(&rec.url, DocStatus::SkippedOffline, DateTime::<Utc>::UNIX_EPOCH),
            }
        })
        .collect();
    docs.sort_by(|a, b| a.url.cmp(&b.url));
    let summary = FetchSummary::from_documents(&docs);
    (docs, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_id_is_deterministic() {
        assert_eq!(doc_id("https://a.com/"), doc_id("https://a.com/"));
        assert_ne!(doc_id("https://a.com/"), doc_id("https://b.com/"));
        assert_eq!(doc_id("https://a.com/").len(), 16);
    }

    #[test]
    fn non_success_response_is_flagged() {
        let t = Tokenizer::default();
        let d = WebDocument::from_response("https://a.com/", 404, "<p>gone</p>".into(), Utc::now(), &t);
        assert_eq!(d.status, DocStatus::HttpError);
        assert_eq!(d.http_status, 404);
        assert!(d.plain_text.is_empty());
        assert_eq!(d.token_count, 0);
    }

    #[test]
    fn token_count_matches_tokenizer() {
        let t = Tokenizer::default();
        let d = WebDocument::from_response(
            "https://a.com/",
            200,
            "<p>The quick brown fox.</p><p>Jumps over lazy dogs</p>".into(),
            Utc::now(),
            &t,
        );
        assert_eq!(d.token_count, t.tokenize(&d.plain_text).tokens.len());
        assert!(d.is_ok());
    }

    #[test]
    fn status_serializes_with_colon() {
        assert_eq!(
            serde_json::to_string(&DocStatus::SkippedRobots).unwrap(),
            "\"skipped:robots\""
        );
        assert_eq!(DocStatus::SkippedRobots.as_str(), "skipped:robots");
    }

    #[test]
    fn bad_config_aborts() {
        let cfg = FetchConfig {
            max_concurrent_hosts: 0,
            ..FetchConfig::default()
        };
        struct Never;
        impl HttpClient for Never {
            fn get(&self, _: &str) -> Result<super::super::http::HttpResponse, super::super::http::TransportError> {
                unreachable!()
            }
        }
        let r = fetch_documents(&[], &cfg, &Never, &Tokenizer::default());
        assert!(matches!(r, Err(FetchError::Config(_))));
    }
}
