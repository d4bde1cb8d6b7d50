use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{BackendKind, EmbeddingBackend, ModelSpec};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token for remote backends.
pub const API_KEY_ENV: &str = "SYMBED_API_KEY";

/// Retries transport errors, HTTP 429 and 5xx with doubling delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.pow(retry)
    }
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

enum Attempt {
    Done(Vec<Vec<f64>>),
    Retry(String),
    Fatal(String),
}

/// Client for `POST {endpoint}/embeddings` in the OpenAI-compatible shape.
pub struct RemoteHttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_model: String,
    api_key: String,
    retry: RetryPolicy,
    requests: AtomicUsize,
}

impl RemoteHttpBackend {
    pub fn new(
        model: impl Into<String>,
        endpoint: &str,
        api_model: impl Into<String>,
        api_key: impl Into<String>,
        retry: RetryPolicy,
    ) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        RemoteHttpBackend {
            agent,
            url: format!("{}/embeddings", endpoint.trim_end_matches('/')),
            model: model.into(),
            api_model: api_model.into(),
            api_key: api_key.into(),
            retry,
            requests: AtomicUsize::new(0),
        }
    }

    /// Builds the client from a roster entry, reading the key from [`API_KEY_ENV`].
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let endpoint = spec.endpoint.as_deref().ok_or_else(|| {
            Error::Config(format!(
                "model {:?}: remote_http requires endpoint",
                spec.name
            ))
        })?;
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| Error::Backend {
            model: spec.name.clone(),
            message: format!("{API_KEY_ENV} is not set"),
            text_index: None,
        })?;
        let mut retry = RetryPolicy::default();
        if let Some(ms) = spec.retry_backoff_ms {
            retry.base_delay = Duration::from_millis(ms);
        }
        Ok(Self::new(
            &spec.name,
            endpoint,
            spec.api_model.clone().unwrap_or_else(|| spec.name.clone()),
            api_key,
            retry,
        ))
    }

    fn attempt(&self, texts: &[&str]) -> Attempt {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let body = EmbeddingRequest {
            model: &self.api_model,
            input: texts,
        };
        let resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport error: {e}")),
        };
        let status = resp.status().as_u16();
        if status == 429 || (500..600).contains(&status) {
            return Attempt::Retry(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(format!("HTTP {status}: {}", detail.trim()));
        }
        let parsed: EmbeddingResponse = match resp.body_mut().read_json() {
            Ok(p) => p,
            Err(e) => return Attempt::Fatal(format!("malformed response: {e}")),
        };
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        if data.len() != texts.len() || data.iter().enumerate().any(|(i, d)| d.index != i) {
            return Attempt::Fatal(format!(
                "response indices do not cover {} inputs",
                texts.len()
            ));
        }
        Attempt::Done(data.into_iter().map(|d| d.embedding).collect())
    }
}

impl EmbeddingBackend for RemoteHttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::RemoteHttp
    }

    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut retry = 0;
        loop {
            match self.attempt(texts) {
                Attempt::Done(v) => return Ok(v),
                Attempt::Fatal(message) => {
                    return Err(Error::Backend {
                        model: self.model.clone(),
                        message,
                        text_index: Some(0),
                    })
                }
                Attempt::Retry(message) if retry < self.retry.max_retries => {
                    let delay = self.retry.delay(retry);
                    warn!("{}: {message}; retrying in {delay:?}", self.model);
                    std::thread::sleep(delay);
                    retry += 1;
                }
                Attempt::Retry(message) => {
                    debug!("{}: giving up after {} retries", self.model, retry);
                    return Err(Error::Backend {
                        model: self.model.clone(),
                        message: format!("{message} (after {retry} retries)"),
                        text_index: Some(0),
                    });
                }
            }
        }
    }

    fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(
            (0..3).map(|r| p.delay(r)).collect::<Vec<_>>(),
            vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4)
            ]
        );
    }

    #[test]
    fn unreachable_endpoint_fails_after_retries() {
        let b = RemoteHttpBackend::new(
            "m",
            "http://127.0.0.1:9",
            "m",
            "k",
            RetryPolicy {
                max_retries: 2,
                base_delay: Duration::from_millis(1),
            },
        );
        let err = b.fetch(&["a"]).unwrap_err();
        assert_eq!(b.requests(), 3);
        assert!(err.to_string().contains("after 2 retries"), "{err}");
    }
}
