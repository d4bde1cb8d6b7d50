//! Run configuration, loaded from TOML or JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{HyperGrid, DEFAULT_FOLDS};
use crate::embed::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            outer_folds: DEFAULT_FOLDS,
            inner_folds: DEFAULT_FOLDS,
        }
    }
}

fn default_cache() -> PathBuf {
    PathBuf::from("cache/embeddings.jsonl")
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propositions: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_cache")]
    pub cache: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub grid: HyperGrid,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        let mut cfg: RunConfig = if is_toml {
            toml::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                location: e
                    .span()
                    .map(|s| {
                        let line = text[..s.start].matches('\n').count() + 1;
                        format!("line {line}")
                    })
                    .unwrap_or_else(|| "?".into()),
                message: e.message().to_string(),
            })?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                location: format!("{}:{}", e.line(), e.column()),
                message: e.to_string(),
            })?
        };
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            m.validate()?;
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!("model {:?} listed twice", m.name)));
            }
        }
        if self.cv.outer_folds < 2 || self.cv.inner_folds < 2 {
            return Err(Error::Config("cv folds must be at least 2".into()));
        }
        self.grid.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.resolve(&self.corpus)
    }

    pub fn propositions_path(&self) -> Option<PathBuf> {
        self.propositions.as_deref().map(|p| self.resolve(p))
    }

    pub fn cache_path(&self) -> PathBuf {
        self.resolve(&self.cache)
    }

    pub fn out_path(&self) -> PathBuf {
        self.resolve(&self.out_dir)
    }

    /// SHA-256 over the canonical JSON form of every setting that affects
    /// results. Object keys are sorted, so key order in the file does not
    /// matter; the cache and output locations are left out.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("cache");
            obj.remove("out_dir");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML_A: &str = r#"
corpus = "corpus.json"
seed = 7

[[models]]
name = "mock-a"
backend = "mock"
expected_dimension = 8

[cv]
outer_folds = 5
inner_folds = 3

[grid]
c = [1.0, 10.0]
gamma = ["1/dim", 0.1]
linear = false
"#;

    // same settings, keys in another order
    const TOML_B: &str = r#"
seed = 7
corpus = "corpus.json"

[grid]
linear = false
gamma = ["1/dim", 0.1]
c = [1.0, 10.0]

[cv]
inner_folds = 3
outer_folds = 5

[[models]]
expected_dimension = 8
backend = "mock"
name = "mock-a"
"#;

    fn load(text: &str, name: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        RunConfig::load(&p)
    }

    #[test]
    fn hash_ignores_key_order_and_locations() {
        let a = load(TOML_A, "a.toml").unwrap();
        let b = load(TOML_B, "b.toml").unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.out_dir = PathBuf::from("elsewhere");
        c.cache = PathBuf::from("other.jsonl");
        assert_eq!(c.config_hash(), a.config_hash());
        c.seed = 8;
        assert_ne!(c.config_hash(), a.config_hash());
        let json = serde_json::to_string(&a).unwrap();
        let d = load(&json, "d.json").unwrap();
        assert_eq!(d.config_hash(), a.config_hash());
    }

    #[test]
    fn defaults_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, TOML_A).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.corpus_path(), dir.path().join("corpus.json"));
        assert_eq!(cfg.cache_path(), dir.path().join("cache/embeddings.jsonl"));
        assert_eq!(cfg.cv.inner_folds, 3);
        assert!(cfg.propositions_path().is_none());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(
            load(&TOML_A.replace("seed = 7", "seed = 7\nfolds = 3"), "x.toml")
                .unwrap_err()
                .to_string()
                .contains("folds")
        );
        let dup = format!(
            "{TOML_A}\n[[models]]\nname = \"mock-a\"\nbackend = \"mock\"\nexpected_dimension = 4\n"
        );
        assert!(load(&dup, "x.toml")
            .unwrap_err()
            .to_string()
            .contains("twice"));
        assert!(load("{", "x.json").is_err());
    }
}
