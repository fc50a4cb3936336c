use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use webslr::corpus::Tokenizer;
use webslr::harvest::http::RetryPolicy;
use webslr::harvest::search::{JsonRestEngine, SearchEngine, SearchError, SearchResultRecord};
use webslr::harvest::{fetch_documents, DocStatus, UreqClient};
use webslr::protocol::{EngineKind, FetchConfig};

type Handler = dyn Fn(&str, usize) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server. The handler gets the request target and how
/// many times that target was requested before.
struct TestServer {
    base: String,
    log: Arc<Mutex<Vec<(String, Instant)>>>,
}

impl TestServer {
    fn start(handler: impl Fn(&str, usize) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let log: Arc<Mutex<Vec<(String, Instant)>>> = Arc::default();
        let handler: Arc<Handler> = Arc::new(handler);
        let server_log = log.clone();
        std::thread::spawn(move || {
            let mut seen: HashMap<String, usize> = HashMap::new();
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let arrived = Instant::now();
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                }
                let target = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let n = seen.entry(target.clone()).or_insert(0);
                let (status, body) = handler(&target, *n);
                *n += 1;
                server_log.lock().unwrap().push((target, arrived));
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
            }
        });
        Self { base, log }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn requests(&self) -> Vec<(String, Instant)> {
        self.log.lock().unwrap().clone()
    }

    fn count(&self, path: &str) -> usize {
        self.requests().iter().filter(|(p, _)| p == path).count()
    }
}

fn page(words: &str) -> String {
    format!("<html><body><p>{words}</p></body></html>")
}

fn record(url: String) -> SearchResultRecord {
    SearchResultRecord {
        url,
        title: String::new(),
        snippet: String::new(),
        rank: 1,
        engine_id: "test".into(),
        query: "q".into(),
    }
}

fn config() -> FetchConfig {
    FetchConfig {
        min_delay_ms: 0,
        max_retries: 2,
        backoff_base_ms: 5,
        timeout_ms: 5_000,
        ..FetchConfig::default()
    }
}

fn client() -> UreqClient {
    UreqClient::new("webslr-test/0.1", Duration::from_secs(5))
}

fn fetch(records: &[SearchResultRecord], cfg: &FetchConfig) -> Vec<webslr::harvest::WebDocument> {
    fetch_documents(records, cfg, &client(), &Tokenizer::default()).unwrap().0
}

#[test]
fn robots_rules_are_honored() {
    let server = TestServer::start(|path, _| match path {
        "/robots.txt" => (200, "User-agent: *\nDisallow: /private\n".into()),
        _ => (200, page("public page about storage buckets")),
    });
    let docs = fetch(&[record(server.url("/public")), record(server.url("/private/x"))], &config());
    let status: HashMap<&str, DocStatus> = docs.iter().map(|d| (d.url.rsplit('/').next().unwrap(), d.status)).collect();
    assert_eq!(status["public"], DocStatus::Ok);
    assert_eq!(status["x"], DocStatus::SkippedRobots);
    assert_eq!(server.count("/robots.txt"), 1);
    assert_eq!(server.count("/private/x"), 0);
}

#[test]
fn robots_can_be_ignored() {
    let server = TestServer::start(|path, _| match path {
        "/robots.txt" => (200, "User-agent: *\nDisallow: /\n".into()),
        _ => (200, page("anything")),
    });
    let cfg = FetchConfig {
        honor_robots: false,
        ..config()
    };
    let docs = fetch(&[record(server.url("/a"))], &cfg);
    assert_eq!(docs[0].status, DocStatus::Ok);
    assert_eq!(server.count("/robots.txt"), 0);
}

#[test]
fn not_found_is_flagged_without_retry() {
    let server = TestServer::start(|path, _| match path {
        "/robots.txt" => (404, String::new()),
        "/gone" => (404, "missing".into()),
        _ => (200, page("fine")),
    });
    let docs = fetch(&[record(server.url("/gone")), record(server.url("/here"))], &config());
    let gone = docs.iter().find(|d| d.url.ends_with("/gone")).unwrap();
    assert_eq!(gone.status, DocStatus::HttpError);
    assert_eq!(gone.http_status, 404);
    assert!(gone.plain_text.is_empty());
    assert_eq!(server.count("/gone"), 1);
    assert!(docs.iter().find(|d| d.url.ends_with("/here")).unwrap().is_ok());
}

#[test]
fn transient_errors_are_retried() {
    let server = TestServer::start(|path, n| match path {
        "/robots.txt" => (404, String::new()),
        "/flaky" if n < 2 => (503, "busy".into()),
        "/down" => (500, "broken".into()),
        _ => (200, page("recovered text")),
    });
    let docs = fetch(&[record(server.url("/flaky")), record(server.url("/down"))], &config());
    let flaky = docs.iter().find(|d| d.url.ends_with("/flaky")).unwrap();
    assert_eq!(flaky.status, DocStatus::Ok);
    assert_eq!(flaky.plain_text.trim(), "recovered text");
    assert_eq!(server.count("/flaky"), 3);
    let down = docs.iter().find(|d| d.url.ends_with("/down")).unwrap();
    assert_eq!(down.status, DocStatus::HttpError);
    assert_eq!(server.count("/down"), 3);
}

#[test]
fn requests_to_one_host_are_spaced() {
    let server = TestServer::start(|_, _| (200, page("text")));
    let cfg = FetchConfig {
        min_delay_ms: 500,
        honor_robots: false,
        ..config()
    };
    let records: Vec<_> = ["/1", "/2", "/3"].iter().map(|p| record(server.url(p))).collect();
    let docs = fetch(&records, &cfg);
    assert!(docs.iter().all(|d| d.is_ok()));
    let times: Vec<Instant> = server.requests().iter().map(|(_, t)| *t).collect();
    assert_eq!(times.len(), 3);
    for w in times.windows(2) {
        let gap = w[1] - w[0];
        assert!(gap >= Duration::from_millis(490), "gap {gap:?}");
    }
}

#[test]
fn unreachable_host_is_a_transport_error() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/x", listener.local_addr().unwrap());
    drop(listener);
    let cfg = FetchConfig {
        max_retries: 1,
        honor_robots: false,
        ..config()
    };
    let docs = fetch(&[record(url)], &cfg);
    assert_eq!(docs[0].status, DocStatus::TransportError);
}

fn rest_kind(template: &str, credential_env: Option<&str>) -> EngineKind {
    EngineKind::JsonRest {
        url_template: template.into(),
        credential_env: credential_env.map(str::to_string),
        results_pointer: "/items".into(),
        url_pointer: "/link".into(),
        title_pointer: Some("/title".into()),
        snippet_pointer: None,
        page_size: 2,
    }
}

fn retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 1,
        backoff_base: Duration::from_millis(5),
    }
}

fn results_page(links: &[&str]) -> String {
    let items: Vec<String> = links
        .iter()
        .map(|l| format!(r#"{{"link":"{l}","title":"T {l}"}}"#))
        .collect();
    format!(r#"{{"items":[{}]}}"#, items.join(","))
}

#[test]
fn json_rest_pages_until_short_page() {
    let server = TestServer::start(|path, _| {
        let body = if path.contains("page=1") {
            results_page(&["https://a.example/1", "https://a.example/2"])
        } else if path.contains("page=2") {
            results_page(&["https://a.example/3", "https://a.example/4"])
        } else {
            results_page(&["https://a.example/5"])
        };
        (200, body)
    });
    let template = server.url("/search?q={query}&page={page}&start={start}&n={count}");
    let engine = JsonRestEngine::from_config("rest", &rest_kind(&template, None), Arc::new(client()), retry()).unwrap();
    let hits = engine.search("api timeout", 10).unwrap();
    let urls: Vec<&str> = hits.iter().map(|h| h.url.as_str()).collect();
    assert_eq!(urls.len(), 5);
    assert_eq!(urls[4], "https://a.example/5");
    assert_eq!(hits[0].title, "T https://a.example/1");
    let requests = server.requests();
    assert_eq!(requests.len(), 3);
    assert!(requests[0].0.contains("q=api+timeout"));
    assert!(requests[1].0.contains("start=3"));

    let capped = engine.search("api timeout", 3).unwrap();
    assert_eq!(capped.len(), 3);
}

#[test]
fn json_rest_reports_malformed_results() {
    let server = TestServer::start(|_, _| (200, r#"{"items":[{"title":"no link"}]}"#.into()));
    let engine = JsonRestEngine::from_config(
        "rest",
        &rest_kind(&server.url("/s?q={query}"), None),
        Arc::new(client()),
        retry(),
    )
    .unwrap();
    match engine.search("x", 5) {
        Err(SearchError::Malformed { engine_id, .. }) => assert_eq!(engine_id, "rest"),
        other => panic!("expected a malformed-response error, got {other:?}"),
    }
}

#[test]
fn json_rest_server_error_after_retries() {
    let server = TestServer::start(|_, _| (502, "bad gateway".into()));
    let engine = JsonRestEngine::from_config(
        "rest",
        &rest_kind(&server.url("/s?q={query}"), None),
        Arc::new(client()),
        retry(),
    )
    .unwrap();
    assert!(matches!(engine.search("x", 5), Err(SearchError::Transport { .. })));
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn json_rest_credentials_come_from_the_environment() {
    let missing = JsonRestEngine::from_config(
        "rest",
        &rest_kind("http://127.0.0.1:9/s?key={credential}", Some("WEBSLR_TEST_UNSET_KEY")),
        Arc::new(client()),
        retry(),
    );
    assert!(matches!(missing, Err(SearchError::MissingCredential { ref env, .. }) if env == "WEBSLR_TEST_UNSET_KEY"));

    std::env::set_var("WEBSLR_TEST_SEARCH_KEY", "s3cret&x");
    let engine = JsonRestEngine::from_config(
        "rest",
        &rest_kind("http://h.example/s?key={credential}&q={query}", Some("WEBSLR_TEST_SEARCH_KEY")),
        Arc::new(client()),
        retry(),
    )
    .unwrap();
    assert_eq!(engine.request_url("a b", 0), "http://h.example/s?key=s3cret%26x&q=a+b");
}
