//! Embedding backends behind one trait, selected by name at runtime.
//!
//! Three backends ship with the crate: `remote_http` (OpenAI-compatible
//! embeddings endpoint), `local_cache_only` (never fetches, fails on a cache
//! miss) and `mock` (seeded hash expansion, for offline runs). The
//! [`BackendRegistry`] maps each name to a constructor so callers can swap or
//! add backends without touching the evaluation code.

mod cache;
mod mock;
mod remote;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use cache::{CacheEntry, EmbeddingCache};
pub use mock::{mock_embed, mock_values, MockBackend};
pub use remote::{RemoteHttpBackend, RetryPolicy, API_KEY_ENV};

pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteHttp,
    LocalCacheOnly,
    Mock,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::RemoteHttp => "remote_http",
            BackendKind::LocalCacheOnly => "local_cache_only",
            BackendKind::Mock => "mock",
        }
    }
}

/// One embedding model in the roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub backend: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dimension: Option<usize>,
    /// Model id sent on the wire; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    /// Seed for the mock backend; defaults to a digest of `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrency: Option<usize>,
    /// First retry delay; later retries double it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_backoff_ms: Option<u64>,
}

impl ModelSpec {
    pub fn mock(name: impl Into<String>, dimension: usize) -> Self {
        ModelSpec {
            name: name.into(),
            backend: BackendKind::Mock,
            endpoint: None,
            expected_dimension: Some(dimension),
            api_model: None,
            mock_seed: None,
            batch_size: None,
            concurrency: None,
            retry_backoff_ms: None,
        }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        ModelSpec {
            backend: BackendKind::RemoteHttp,
            endpoint: Some(endpoint.into()),
            expected_dimension: None,
            ..ModelSpec::mock(name, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("model {:?}: {msg}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty model name");
        }
        if self.expected_dimension == Some(0) {
            return bad("expected_dimension must be positive");
        }
        if self.batch_size == Some(0) || self.concurrency == Some(0) {
            return bad("batch_size and concurrency must be positive");
        }
        match self.backend {
            BackendKind::RemoteHttp if self.endpoint.is_none() => {
                bad("remote_http requires endpoint")
            }
            BackendKind::Mock if self.expected_dimension.is_none_or(|d| d < 2) => {
                bad("mock backend requires expected_dimension >= 2")
            }
            _ => Ok(()),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size.unwrap_or(DEFAULT_BATCH_SIZE)
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency.unwrap_or(DEFAULT_CONCURRENCY)
    }

    pub fn effective_mock_seed(&self) -> u64 {
        self.mock_seed.unwrap_or_else(|| {
            let d = Sha256::digest(self.name.as_bytes());
            u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
        })
    }
}

/// A model-tagged, finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub model: String,
    pub dimension: usize,
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(model: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("embedding has dimension 0".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "embedding component {k} is not finite"
            )));
        }
        Ok(EmbeddingVector {
            model: model.into(),
            dimension: values.len(),
            values,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Hex SHA-256 of the exact text bytes; the cache key alongside the model name.
pub fn text_sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A source of embeddings for one model.
pub trait EmbeddingBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Embeds one batch. Must return exactly one vector per input, in order.
    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    /// Whether fetched vectors should be written to the persistent cache.
    fn persist_to_cache(&self) -> bool {
        true
    }

    /// Number of network requests issued so far.
    fn requests(&self) -> usize {
        0
    }
}

/// Backend that only serves what is already cached.
pub struct CacheOnlyBackend {
    model: String,
}

impl CacheOnlyBackend {
    pub fn new(model: impl Into<String>) -> Self {
        CacheOnlyBackend {
            model: model.into(),
        }
    }
}

impl EmbeddingBackend for CacheOnlyBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::LocalCacheOnly
    }

    fn fetch(&self, _texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Err(Error::CacheMiss {
            model: self.model.clone(),
            text_index: 0,
        })
    }
}

pub type BackendFactory = fn(&ModelSpec) -> Result<Box<dyn EmbeddingBackend>>;

/// Name → constructor table for embedding backends.
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
    offline: bool,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            factories: BTreeMap::new(),
            offline: false,
        }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register(BackendKind::RemoteHttp.as_str(), |spec| {
            Ok(Box::new(RemoteHttpBackend::from_spec(spec)?))
        });
        r.register(BackendKind::LocalCacheOnly.as_str(), |spec| {
            Ok(Box::new(CacheOnlyBackend::new(&spec.name)))
        });
        r.register(BackendKind::Mock.as_str(), |spec| {
            Ok(Box::new(MockBackend::from_spec(spec)?))
        });
        r
    }

    /// In offline mode network backends are served from the cache only.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn register(&mut self, name: &str, factory: BackendFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Box<dyn EmbeddingBackend>> {
        spec.validate()?;
        let kind = if self.offline && spec.backend == BackendKind::RemoteHttp {
            BackendKind::LocalCacheOnly
        } else {
            spec.backend
        };
        let factory = self.factories.get(kind.as_str()).ok_or_else(|| {
            Error::Config(format!("no backend registered under {:?}", kind.as_str()))
        })?;
        factory(spec)
    }
}

/// Embeds `texts` for `spec`, consulting `cache` first.
///
/// Misses are deduplicated, fetched in batches (up to `spec.concurrency()`
/// batches in flight) and appended to the cache in input order. Output `i`
/// corresponds to `texts[i]`.
pub fn embed_texts(
    backend: &dyn EmbeddingBackend,
    spec: &ModelSpec,
    texts: &[String],
    cache: &mut EmbeddingCache,
) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(Error::InvalidInput("no texts to embed".into()));
    }
    let model = spec.name.as_str();

    // key -> first index in `texts`
    let mut first_index: HashMap<&str, usize> = HashMap::new();
    let mut resolved: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut misses: Vec<(usize, String)> = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        if first_index.contains_key(t.as_str()) {
            continue;
        }
        first_index.insert(t, i);
        let key = text_sha256(t);
        match cache.get(model, &key) {
            Some(hit) => {
                resolved.insert(t, hit.values.clone());
            }
            None => misses.push((i, key)),
        }
    }

    if !misses.is_empty() {
        let fetched = fetch_batches(backend, spec, texts, &misses)?;
        let mut new_entries = Vec::with_capacity(misses.len());
        for ((i, key), values) in misses.iter().zip(fetched) {
            check_vector(spec, &values, *i)?;
            if backend.persist_to_cache() {
                new_entries.push(CacheEntry {
                    model: model.to_string(),
                    text_sha256: key.clone(),
                    dimension: values.len(),
                    values: values.clone(),
                });
            }
            resolved.insert(texts[*i].as_str(), values);
        }
        cache.append(new_entries)?;
    }

    let mut dimension = None;
    let mut out = Vec::with_capacity(texts.len());
    for (i, t) in texts.iter().enumerate() {
        let values = resolved[t.as_str()].clone();
        check_vector(spec, &values, i)?;
        match dimension {
            None => dimension = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::DimensionMismatch {
                    model: model.to_string(),
                    expected: d,
                    actual: values.len(),
                    text_index: Some(i),
                })
            }
            Some(_) => {}
        }
        out.push(EmbeddingVector {
            model: model.to_string(),
            dimension: values.len(),
            values,
        });
    }
    Ok(out)
}

fn check_vector(spec: &ModelSpec, values: &[f64], text_index: usize) -> Result<()> {
    if let Some(expected) = spec.expected_dimension {
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                model: spec.name.clone(),
                expected,
                actual: values.len(),
                text_index: Some(text_index),
            });
        }
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Backend {
            model: spec.name.clone(),
            message: "empty or non-finite embedding".into(),
            text_index: Some(text_index),
        });
    }
    Ok(())
}

fn fetch_batches(
    backend: &dyn EmbeddingBackend,
    spec: &ModelSpec,
    texts: &[String],
    misses: &[(usize, String)],
) -> Result<Vec<Vec<f64>>> {
    let batches: Vec<&[(usize, String)]> = misses.chunks(spec.batch_size()).collect();
    type Slot = Option<Result<Vec<Vec<f64>>>>;
    let results: Mutex<Vec<Slot>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = spec.concurrency().min(batches.len()).max(1);

    let run_batch = |b: usize| -> Result<Vec<Vec<f64>>> {
        let batch = batches[b];
        let inputs: Vec<&str> = batch.iter().map(|(i, _)| texts[*i].as_str()).collect();
        let first = batch[0].0;
        let vectors = backend.fetch(&inputs).map_err(|e| relocate(e, first))?;
        if vectors.len() != inputs.len() {
            return Err(Error::Backend {
                model: spec.name.clone(),
                message: format!(
                    "backend returned {} vectors for {} inputs",
                    vectors.len(),
                    inputs.len()
                ),
                text_index: Some(first),
            });
        }
        Ok(vectors)
    };

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::SeqCst);
                if b >= batches.len() {
                    break;
                }
                let r = run_batch(b);
                results.lock().expect("batch results lock")[b] = Some(r);
            });
        }
    });

    let mut out = Vec::with_capacity(misses.len());
    for r in results.into_inner().expect("batch results lock") {
        out.extend(r.expect("every batch ran")?);
    }
    Ok(out)
}

/// Rewrites a batch-relative text index into an index into the caller's list.
fn relocate(err: Error, batch_start: usize) -> Error {
    match err {
        Error::CacheMiss { model, text_index } => Error::CacheMiss {
            model,
            text_index: batch_start + text_index,
        },
        Error::Backend {
            model,
            message,
            text_index,
        } => Error::Backend {
            model,
            message,
            text_index: Some(batch_start + text_index.unwrap_or(0)),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::AtomicUsize;

    /// Counts calls; returns a vector whose first component encodes the text length.
    struct Counting {
        calls: AtomicUsize,
        dimension: usize,
    }

    impl EmbeddingBackend for Counting {
        fn kind(&self) -> BackendKind {
            BackendKind::RemoteHttp
        }
        fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(texts
                .iter()
                .map(|t| {
                    let mut v = vec![0.5; self.dimension];
                    v[0] = t.len() as f64;
                    v[1] = t.bytes().map(f64::from).sum::<f64>();
                    v
                })
                .collect())
        }
        fn requests(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn mock_duplicates_are_identical() {
        let spec = ModelSpec::mock("m", 8);
        let backend = BackendRegistry::with_builtin().build(&spec).unwrap();
        let mut cache = EmbeddingCache::in_memory();
        let v = embed_texts(&*backend, &spec, &strings(&["a", "a"]), &mut cache).unwrap();
        assert_eq!(v[0], v[1]);
        assert_eq!(v[0].dimension, 8);
        assert!(cache.is_empty(), "mock vectors are not persisted");
    }

    #[test]
    fn warm_cache_issues_no_requests() {
        let mut spec = ModelSpec::remote("r", "http://unused");
        spec.batch_size = Some(2);
        let backend = Counting {
            calls: AtomicUsize::new(0),
            dimension: 3,
        };
        let mut cache = EmbeddingCache::in_memory();
        let texts = strings(&["x", "yy", "zzz", "x", "wwww"]);
        let first = embed_texts(&backend, &spec, &texts, &mut cache).unwrap();
        assert_eq!(backend.requests(), 2, "4 unique texts in batches of 2");
        let second = embed_texts(&backend, &spec, &texts, &mut cache).unwrap();
        assert_eq!(backend.requests(), 2);
        assert_eq!(first, second);
    }

    #[test]
    fn dimension_mismatch_names_model() {
        let mut spec = ModelSpec::remote("GPT-text-embedding-3-large", "http://unused");
        spec.expected_dimension = Some(3072);
        let backend = Counting {
            calls: AtomicUsize::new(0),
            dimension: 1536,
        };
        let err = embed_texts(
            &backend,
            &spec,
            &strings(&["a"]),
            &mut EmbeddingCache::in_memory(),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("GPT-text-embedding-3-large")
                && msg.contains("3072")
                && msg.contains("1536"),
            "{msg}"
        );
    }

    #[test]
    fn cache_only_miss_is_an_error() {
        let mut spec = ModelSpec::remote("r", "http://unused");
        spec.backend = BackendKind::LocalCacheOnly;
        let backend = BackendRegistry::with_builtin().build(&spec).unwrap();
        let err = embed_texts(
            &*backend,
            &spec,
            &strings(&["a", "b"]),
            &mut EmbeddingCache::in_memory(),
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::CacheMiss { text_index: 0, .. }),
            "{err}"
        );
    }

    #[test]
    fn offline_registry_downgrades_remote() {
        let spec = ModelSpec::remote("r", "http://127.0.0.1:9");
        let backend = BackendRegistry::with_builtin()
            .offline(true)
            .build(&spec)
            .unwrap();
        assert_eq!(backend.kind(), BackendKind::LocalCacheOnly);
    }

    #[test]
    fn spec_validation() {
        let mut s = ModelSpec::remote("r", "x");
        s.endpoint = None;
        assert!(s.validate().is_err());
        assert!(ModelSpec::mock("m", 1).validate().is_err());
        assert!(ModelSpec::mock("m", 2).validate().is_ok());
        assert!(BackendRegistry::empty()
            .build(&ModelSpec::mock("m", 4))
            .is_err());
    }

    #[test]
    fn empty_input_rejected() {
        let spec = ModelSpec::mock("m", 4);
        let b = MockBackend::from_spec(&spec).unwrap();
        assert!(embed_texts(&b, &spec, &[], &mut EmbeddingCache::in_memory()).is_err());
    }

    proptest! {
        #[test]
        fn output_order_matches_input(
            pool in proptest::collection::vec("[a-z]{1,6}", 1..8),
            picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..40),
            batch in 1usize..5,
            workers in 1usize..5,
        ) {
            let texts: Vec<String> = picks.iter().map(|ix| ix.get(&pool).clone()).collect();
            let mut spec = ModelSpec::remote("r", "http://unused");
            spec.batch_size = Some(batch);
            spec.concurrency = Some(workers);
            let backend = Counting { calls: AtomicUsize::new(0), dimension: 2 };
            let out = embed_texts(&backend, &spec, &texts, &mut EmbeddingCache::in_memory()).unwrap();
            prop_assert_eq!(out.len(), texts.len());
            for (t, v) in texts.iter().zip(&out) {
                prop_assert_eq!(v.values[0], t.len() as f64);
                prop_assert_eq!(v.values[1], t.bytes().map(f64::from).sum::<f64>());
            }
        }
    }
}
