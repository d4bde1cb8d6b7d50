//! Per-model orchestration of the two evaluation arms.
//!
//! Input and configuration errors abort the run. A failure inside one model
//! (unreachable endpoint, cache miss, bad dimension) is recorded in the
//! bundle and the remaining models still run.

use std::fs;

use log::{info, warn};

use crate::classify::{check_inputs, plan_for, run_pipeline};
use crate::config::{file_sha256, RunConfig};
use crate::corpus::{load_corpus, load_propositions, Corpus, CorpusFormat, PropositionRecord};
use crate::embed::{embed_texts, BackendRegistry, EmbeddingCache, ModelSpec};
use crate::error::{Error, Result};
use crate::report::{EvaluationBundle, RunMetadata, SimevalResult};
use crate::simeval::similarity_table;

/// Models that failed in a phase; empty when everything succeeded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhaseOutcome {
    pub failed: Vec<String>,
}

impl PhaseOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failed.is_empty()
    }
}

pub fn open_cache(cfg: &RunConfig) -> Result<EmbeddingCache> {
    let path = cfg.cache_path();
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    EmbeddingCache::open(&path)
}

pub fn load_run_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg.corpus_path();
    load_corpus(&path, CorpusFormat::from_path(&path))
}

pub fn load_run_propositions(cfg: &RunConfig) -> Result<Vec<PropositionRecord>> {
    let path = cfg.propositions_path().ok_or_else(|| {
        Error::Config("no propositions path in the config (set `propositions`)".into())
    })?;
    load_propositions(&path)
}

/// Fresh bundle whose metadata describes `cfg`.
pub fn new_bundle(cfg: &RunConfig) -> EvaluationBundle {
    EvaluationBundle::new(RunMetadata::new(
        cfg.seed,
        cfg.config_hash(),
        cfg.models.clone(),
    ))
}

fn log_requests(spec: &ModelSpec, requests: usize) {
    info!("{}: {requests} network requests", spec.name);
}

/// Embeds every text the configured inputs contain, filling the cache.
pub fn warm_cache(
    cfg: &RunConfig,
    registry: &BackendRegistry,
    cache: &mut EmbeddingCache,
) -> Result<PhaseOutcome> {
    let corpus = load_run_corpus(cfg)?;
    let props = match cfg.propositions_path() {
        Some(_) => load_run_propositions(cfg)?,
        None => Vec::new(),
    };
    let mut texts: Vec<String> = Vec::new();
    for r in &corpus.records {
        texts.extend([r.se.clone(), r.lt.clone(), r.ilt.clone(), r.ot.clone()]);
        texts.extend(r.rc.iter().chain(r.irc.iter()).cloned());
    }
    texts.extend(props.iter().map(PropositionRecord::full_text));

    let mut outcome = PhaseOutcome::default();
    for spec in &cfg.models {
        let result = registry.build(spec).and_then(|backend| {
            let r = embed_texts(backend.as_ref(), spec, &texts, cache);
            log_requests(spec, backend.requests());
            r
        });
        match result {
            Ok(v) => info!("{}: {} texts embedded", spec.name, v.len()),
            Err(e) => {
                warn!("{}: {e}", spec.name);
                outcome.failed.push(spec.name.clone());
            }
        }
    }
    Ok(outcome)
}

/// Similarity arm for every model in the roster.
pub fn run_simeval(
    cfg: &RunConfig,
    registry: &BackendRegistry,
    cache: &mut EmbeddingCache,
    bundle: &mut EvaluationBundle,
) -> Result<PhaseOutcome> {
    let corpus = load_run_corpus(cfg)?;
    bundle.metadata.corpus_hash = Some(file_sha256(&cfg.corpus_path())?);
    let mut outcome = PhaseOutcome::default();
    for spec in &cfg.models {
        let result = registry.build(spec).and_then(|backend| {
            let rows = similarity_table(&corpus, spec, backend.as_ref(), cache);
            log_requests(spec, backend.requests());
            SimevalResult::from_rows(rows?)
        });
        match result {
            Ok(r) => {
                info!("{}: {} similarity rows", spec.name, r.similarity_rows.len());
                bundle
                    .metadata
                    .failed_models
                    .retain(|f| !(f.model == spec.name && f.phase == "simeval"));
                bundle.model_mut(&spec.name).simeval = Some(r);
            }
            Err(e) => {
                warn!("{}: simeval failed: {e}", spec.name);
                bundle.record_failure(&spec.name, "simeval", &e);
                outcome.failed.push(spec.name.clone());
            }
        }
    }
    Ok(outcome)
}

/// Classification arm for every model in the roster.
pub fn run_mlbench(
    cfg: &RunConfig,
    registry: &BackendRegistry,
    cache: &mut EmbeddingCache,
    bundle: &mut EvaluationBundle,
) -> Result<PhaseOutcome> {
    let props = load_run_propositions(cfg)?;
    let path = cfg
        .propositions_path()
        .expect("checked by load_run_propositions");
    bundle.metadata.propositions_hash = Some(file_sha256(&path)?);
    let plan = plan_for(&props, cfg.cv.outer_folds, cfg.seed)?;
    check_inputs(&props, &plan, cfg.cv.inner_folds)?;
    for w in &plan.warnings {
        warn!("{w}");
    }
    let mut outcome = PhaseOutcome::default();
    for spec in &cfg.models {
        let result = registry.build(spec).and_then(|backend| {
            let r = run_pipeline(
                &props,
                spec,
                backend.as_ref(),
                cache,
                &plan,
                cfg.cv.inner_folds,
                &cfg.grid,
            );
            log_requests(spec, backend.requests());
            r
        });
        match result {
            Ok(r) => {
                bundle
                    .metadata
                    .failed_models
                    .retain(|f| !(f.model == spec.name && f.phase == "mlbench"));
                bundle.model_mut(&spec.name).classifier = Some(r);
            }
            Err(e) => {
                warn!("{}: mlbench failed: {e}", spec.name);
                bundle.record_failure(&spec.name, "mlbench", &e);
                outcome.failed.push(spec.name.clone());
            }
        }
    }
    Ok(outcome)
}
