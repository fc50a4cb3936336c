//! Minimal blocking HTTP surface used by the search and fetch code.

use std::io::Read;
use std::time::Duration;

const MAX_BODY_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// 429 and 5xx responses are worth retrying.
    pub fn is_retryable(&self) -> bool {
        self.status == 429 || self.status >= 500
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("transport failure: {0}")]
pub struct TransportError(pub String);

pub trait HttpClient: Send + Sync {
    /// Issues a GET. Non-2xx statuses are responses, not errors.
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError>;
}

pub struct UreqClient {
    agent: ureq::Agent,
}

impl UreqClient {
    pub fn new(user_agent: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .user_agent(user_agent)
            .timeout(timeout)
            .redirects(5)
            .build();
        Self { agent }
    }
}

impl HttpClient for UreqClient {
    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let response = match self.agent.get(url).call() {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(ureq::Error::Transport(t)) => return Err(TransportError(t.to_string())),
        };
        let status = response.status();
        let mut bytes = Vec::new();
        response
            .into_reader()
            .take(MAX_BODY_BYTES)
            .read_to_end(&mut bytes)
            .map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpResponse {
            status,
            body: String::from_utf8_lossy(&bytes).into_owned(),
        })
    }
}

/// Retry settings: `max_retries` extra attempts after the first, sleeping
/// `backoff_base * 2^attempt` between them.
#[derive(Clone, Copy, Debug)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

/// Outcome of a retried GET plus the number of attempts made.
pub struct Attempted {
    pub result: Result<HttpResponse, TransportError>,
    pub attempts: u32,
}

/// GETs `url`, retrying transport failures, 429 and 5xx. `before_attempt`
/// runs before every attempt so callers can enforce per-host spacing.
pub fn get_with_retry(
    client: &dyn HttpClient,
    url: &str,
    policy: RetryPolicy,
    mut before_attempt: impl FnMut(),
) -> Attempted {
    let mut attempt = 0;
    loop {
        before_attempt();
        let result = client.get(url);
        attempt += 1;
        let retry = match &result {
            Ok(r) => r.is_retryable(),
            Err(_) => true,
        };
        if !retry || attempt > policy.max_retries {
            return Attempted {
                result,
                attempts: attempt,
            };
        }
        let factor = 1u32 << (attempt - 1).min(16);
        std::thread::sleep(policy.backoff_base * factor);
    }
}
