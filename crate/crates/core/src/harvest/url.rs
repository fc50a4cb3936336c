//! URL normalization shared by search dedup and QGS comparison.

use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid URL {url:?}: {reason}")]
pub struct UrlError {
    pub url: String,
    pub reason: String,
}

fn is_tracking_param(key: &str) -> bool {
    key.starts_with("utm_") || key == "fbclid" || key == "gclid"
}

/// Normalizes an absolute http(s) URL.
///
/// Scheme and host are lowercased, default ports and the fragment dropped,
/// tracking parameters (`utm_*`, `fbclid`, `gclid`) removed and the remaining
/// query parameters sorted by key. An empty path becomes `/`.
pub fn normalize_url(raw: &str) -> Result<String, UrlError> {
    let err = |reason: &str| UrlError {
        url: raw.to_string(),
        reason: reason.to_string(),
    };
    let mut url = Url::parse(raw.trim()).map_err(|e| err(&e.to_string()))?;
    if url.scheme() != "http" && url.scheme() != "https" {
        return Err(err("scheme must be http or https"));
    }
    if url.host_str().is_none_or(str::is_empty) {
        return Err(err("missing host"));
    }
    url.set_fragment(None);

    let mut pairs: Vec<(String, String)> = url
        .query_pairs()
        .filter(|(k, _)| !is_tracking_param(k))
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    if pairs.is_empty() {
        url.set_query(None);
    } else {
        let query = url::form_urlencoded::Serializer::new(String::new())
            .extend_pairs(pairs)
            .finish();
        url.set_query(Some(&query));
    }
    if url.path().is_empty() {
        url.set_path("/");
    }
    Ok(url.to_string())
}

/// Host (with non-default port) of a normalized URL.
pub fn host_key(url: &str) -> Option<String> {
    let parsed = Url::parse(url).ok()?;
    let host = parsed.host_str()?.to_string();
    Some(match parsed.port() {
        Some(port) => format!("{host}:{port}"),
        None => host,
    })
}

/// True when the URL's host equals `filter` or is a subdomain of it.
pub fn host_matches(url: &str, filter: &str) -> bool {
    let Some(host) = Url::parse(url).ok().and_then(|u| u.host_str().map(str::to_string)) else {
        return false;
    };
    let filter = filter.trim().trim_start_matches('.').to_ascii_lowercase();
    host == filter || host.ends_with(&format!(".{filter}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn listed_rules() {
        assert_eq!(
            normalize_url("HTTP://Example.com:80/a?utm_source=x&b=1#frag").unwrap(),
            "http://example.com/a?b=1"
        );
        assert_eq!(
            normalize_url("https://example.com").unwrap(),
            "https://example.com/"
        );
        assert!(normalize_url("notaurl").is_err());
        assert!(normalize_url("ftp://example.com/file").is_err());
    }

    #[test]
    fn query_sorted_and_trackers_dropped() {
        assert_eq!(
            normalize_url("https://x.org/p?z=1&fbclid=abc&a=2&gclid=q&utm_medium=m").unwrap(),
            "https://x.org/p?a=2&z=1"
        );
        assert_eq!(
            normalize_url("https://x.org:8443/p").unwrap(),
            "https://x.org:8443/p"
        );
        assert_eq!(normalize_url("https://x.org:443/").unwrap(), "https://x.org/");
    }

    #[test]
    fn host_filters() {
        assert!(host_matches("https://forum.example.com/x", "example.com"));
        assert!(host_matches("https://example.com/x", "example.com"));
        assert!(!host_matches("https://badexample.com/x", "example.com"));
        assert_eq!(host_key("http://a.b:8080/x").unwrap(), "a.b:8080");
        assert_eq!(host_key("http://a.b/x").unwrap(), "a.b");
    }

    proptest! {
        #[test]
        fn normalization_is_a_fixpoint(
            scheme in prop_oneof!["http", "https", "HTTP"],
            host in "[a-zA-Z][a-zA-Z0-9]{0,8}\\.(com|org|net)",
            port in proptest::option::of(prop_oneof![Just(80u16), Just(443u16), 1000u16..9000]),
            path in "(/[a-zA-Z0-9_~%.-]{0,6}){0,3}",
            query in proptest::collection::vec(("(utm_[a-z]{1,3}|[a-z]{1,3}|gclid)", "[a-zA-Z0-9 +%&=~]{0,5}"), 0..4),
            frag in proptest::option::of("[a-z]{0,4}"),
        ) {
            let mut raw = format!("{scheme}://{host}");
            if let Some(p) = port { raw.push_str(&format!(":{p}")); }
            raw.push_str(&path);
            if !query.is_empty() {
                raw.push('?');
                let q: Vec<String> = query.iter().map(|(k, v)| format!("{k}={v}")).collect();
                raw.push_str(&q.join("&"));
            }
            if let Some(f) = frag { raw.push('#'); raw.push_str(&f); }
            if let Ok(once) = normalize_url(&raw) {
                let twice = normalize_url(&once).unwrap();
                prop_assert_eq!(&once, &twice);
                prop_assert!(!once.contains('#'));
                prop_assert!(!once.contains("utm_"));
            }
        }
    }
}
