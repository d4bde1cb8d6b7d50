//! Deterministic stand-in for a real embedding model.
//!
//! Component `i` of the embedding of `text` under `seed` is derived from
//!
//! ```text
//! block = SHA-256("symbed-mock/1" || seed as u64 LE || (i / 4) as u64 LE || text bytes)
//! word  = u64 LE from block[8 * (i % 4) .. 8 * (i % 4) + 8]
//! value = (word >> 11) * 2^-52 - 1
//! ```
//!
//! so every value lies in `[-1, 1)`. Components do not depend on the requested
//! dimension: a shorter mock vector is a prefix of a longer one with the same
//! seed.

use sha2::{Digest, Sha256};

use super::{BackendKind, EmbeddingBackend, EmbeddingVector, ModelSpec};
use crate::error::{Error, Result};

const DOMAIN: &[u8] = b"symbed-mock/1";

pub fn mock_values(text: &str, dimension: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(dimension);
    let mut block = 0u64;
    while out.len() < dimension {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(seed.to_le_bytes());
        h.update(block.to_le_bytes());
        h.update(text.as_bytes());
        let digest = h.finalize();
        for lane in digest.chunks_exact(8) {
            if out.len() == dimension {
                break;
            }
            let word = u64::from_le_bytes(lane.try_into().expect("8-byte lane"));
            out.push((word >> 11) as f64 * f64::powi(2.0, -52) - 1.0);
        }
        block += 1;
    }
    out
}

pub fn mock_embed(text: &str, dimension: usize, seed: u64) -> EmbeddingVector {
    assert!(dimension >= 2, "mock dimension must be at least 2");
    EmbeddingVector {
        model: "mock".to_string(),
        dimension,
        values: mock_values(text, dimension, seed),
    }
}

pub struct MockBackend {
    dimension: usize,
    seed: u64,
}

impl MockBackend {
    pub fn new(dimension: usize, seed: u64) -> Self {
        MockBackend { dimension, seed }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let dimension = spec.expected_dimension.filter(|d| *d >= 2).ok_or_else(|| {
            Error::Config(format!(
                "model {:?}: mock backend requires expected_dimension >= 2",
                spec.name
            ))
        })?;
        Ok(MockBackend::new(dimension, spec.effective_mock_seed()))
    }
}

impl EmbeddingBackend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| mock_values(t, self.dimension, self.seed))
            .collect())
    }

    fn persist_to_cache(&self) -> bool {
        false
    }
}
