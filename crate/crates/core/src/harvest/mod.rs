//! Programmatic searching: engines, URL normalization, QGS scoring,
//! polite fetching and HTML text extraction.

pub mod fetch;
pub mod html;
pub mod http;
pub mod qgs;
pub mod search;
pub mod url;

pub use fetch::{
    doc_id, fetch_documents, replay_documents, DocStatus, FetchError, FetchSummary, SnapshotSet,
    WebDocument,
};
pub use html::extract_text;
pub use http::{HttpClient, HttpResponse, TransportError, UreqClient};
pub use qgs::{evaluate_search_string, evaluate_urls, QgsScore};
pub use search::{
    build_engines, run_search, FixtureEngine, JsonRestEngine, RawHit, SearchEngine, SearchError,
    SearchOutcome, SearchResultRecord,
};
pub use url::normalize_url;
