//! Result bundle and everything rendered from it: tables as CSV/JSON and
//! figures as static SVG.
//!
//! Rendering reads only the bundle, so `symbed report` can redraw a run
//! without recomputing anything.

mod svg;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierReport;
use crate::embed::ModelSpec;
use crate::error::{Error, Result};
use crate::simeval::{
    category_summaries, category_values, diff_summaries, diff_table, diff_values, DiffRow,
    DiffSummary, DistributionSummary, SimilarityRow, QUARTILE_METHOD,
};
use crate::stats::{paired_comparison, roc_auc, Comparison, RocResult, TestResult};

pub use svg::{render_boxplots_svg, render_kappa_bars_svg, render_roc_svg};
pub use tables::{
    format_effect, format_percent, kappa_csv, render_table3, summaries_csv, Table3, Table3Row,
};

pub const BUNDLE_SCHEMA: &str = "symbed-bundle/1";
pub const EMBEDDING_INPUT: &str = "raw text, no instruction prefix or template";
pub const KAPPA_CHART_OMITTED: &str = "kappa chart omitted: no classifier results in this run";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedModel {
    pub model: String,
    /// `simeval` or `mlbench`.
    pub phase: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propositions_hash: Option<String>,
    pub roster: Vec<ModelSpec>,
    pub embedding_input: String,
    pub quartile_method: String,
    pub failed_models: Vec<FailedModel>,
    pub notes: Vec<String>,
}

impl RunMetadata {
    pub fn new(seed: u64, config_hash: impl Into<String>, roster: Vec<ModelSpec>) -> Self {
        RunMetadata {
            seed,
            config_hash: config_hash.into(),
            corpus_hash: None,
            propositions_hash: None,
            roster,
            embedding_input: EMBEDDING_INPUT.to_string(),
            quartile_method: QUARTILE_METHOD.to_string(),
            failed_models: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Similarity-arm results of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimevalResult {
    pub similarity_rows: Vec<SimilarityRow>,
    pub diff_rows: Vec<DiffRow>,
    pub category_summaries: Vec<DistributionSummary>,
    pub diff_summaries: Vec<DiffSummary>,
    pub roc_lt_vs_ilt: RocResult,
    /// Absent when no record has related concepts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc_rc_vs_irc: Option<RocResult>,
    pub tests: Vec<TestResult>,
}

impl SimevalResult {
    /// Diffs, summaries, ROC curves and signed-rank tests from the rows.
    pub fn from_rows(similarity_rows: Vec<SimilarityRow>) -> Result<Self> {
        let diff_rows = diff_table(&similarity_rows);
        let roc = |cmp: Comparison| {
            let (good, bad) = match cmp {
                Comparison::LtVsIlt => {
                    (crate::simeval::Category::Lt, crate::simeval::Category::Ilt)
                }
                Comparison::RcVsIrc => {
                    (crate::simeval::Category::Rc, crate::simeval::Category::Irc)
                }
            };
            let correct = category_values(&similarity_rows, good);
            if correct.is_empty() {
                return Ok(None);
            }
            roc_auc(&correct, &category_values(&similarity_rows, bad)).map(Some)
        };
        let roc_lt_vs_ilt = roc(Comparison::LtVsIlt)?
            .ok_or_else(|| Error::InvalidInput("no similarity rows".into()))?;
        let roc_rc_vs_irc = roc(Comparison::RcVsIrc)?;
        let mut tests = Vec::new();
        for cmp in Comparison::ALL {
            let diffs = diff_values(&diff_rows, cmp);
            if !diffs.is_empty() {
                tests.push(paired_comparison(cmp, &diffs)?);
            }
        }
        Ok(SimevalResult {
            category_summaries: category_summaries(&similarity_rows),
            diff_summaries: diff_summaries(&diff_rows),
            similarity_rows,
            diff_rows,
            roc_lt_vs_ilt,
            roc_rc_vs_irc,
            tests,
        })
    }

    pub fn roc(&self, cmp: Comparison) -> Option<&RocResult> {
        match cmp {
            Comparison::LtVsIlt => Some(&self.roc_lt_vs_ilt),
            Comparison::RcVsIrc => self.roc_rc_vs_irc.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simeval: Option<SimevalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationBundle {
    pub schema: String,
    pub metadata: RunMetadata,
    /// In roster order.
    pub models: Vec<ModelResult>,
}

impl EvaluationBundle {
    pub fn new(metadata: RunMetadata) -> Self {
        EvaluationBundle {
            schema: BUNDLE_SCHEMA.to_string(),
            metadata,
            models: Vec::new(),
        }
    }

    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.model == name)
    }

    /// Entry for `name`, created in roster position if missing.
    pub fn model_mut(&mut self, name: &str) -> &mut ModelResult {
        if let Some(i) = self.models.iter().position(|m| m.model == name) {
            return &mut self.models[i];
        }
        let rank = |n: &str| self.metadata.roster.iter().position(|s| s.name == n);
        let at = self
            .models
            .iter()
            .position(|m| rank(&m.model) > rank(name))
            .unwrap_or(self.models.len());
        self.models.insert(
            at,
            ModelResult {
                model: name.to_string(),
                simeval: None,
                classifier: None,
            },
        );
        &mut self.models[at]
    }

    pub fn record_failure(&mut self, model: &str, phase: &str, error: &Error) {
        self.metadata
            .failed_models
            .retain(|f| !(f.model == model && f.phase == phase));
        self.metadata.failed_models.push(FailedModel {
            model: model.to_string(),
            phase: phase.to_string(),
            error: error.to_string(),
        });
    }

    /// Every model result must belong to the roster.
    pub fn validate(&self) -> Result<()> {
        if self.schema != BUNDLE_SCHEMA {
            return Err(Error::InvalidInput(format!(
                "unsupported bundle schema {:?}, expected {BUNDLE_SCHEMA:?}",
                self.schema
            )));
        }
        for m in &self.models {
            if !self.metadata.roster.iter().any(|s| s.name == m.model) {
                return Err(Error::InvalidInput(format!(
                    "bundle has results for {:?}, which is not in the roster",
                    m.model
                )));
            }
        }
        Ok(())
    }

    /// Keeps metadata notes in step with what can be rendered.
    pub fn refresh_notes(&mut self) {
        self.metadata.notes.retain(|n| n != KAPPA_CHART_OMITTED);
        if self.models.iter().all(|m| m.classifier.is_none()) {
            self.metadata.notes.push(KAPPA_CHART_OMITTED.to_string());
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: EvaluationBundle = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "bundle.json".into(),
            source,
        })?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::Json {
                context: path.display().to_string(),
                source,
            },
            other => other,
        })
    }
}

/// File-name-safe version of a model name.
pub fn file_stem(model: &str) -> String {
    model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Every artifact of a run directory except bundle.json, keyed by relative
/// path with `/` separators.
pub fn render_all(bundle: &EvaluationBundle) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let table3 = render_table3(bundle);
    if !table3.rows.is_empty() {
        files.insert("tables/table3.csv".to_string(), table3.csv);
        files.insert("tables/table3.json".to_string(), table3.json);
        files.insert("tables/summaries.csv".to_string(), summaries_csv(bundle));
    }
    for m in &bundle.models {
        if let Some(s) = &m.simeval {
            let stem = file_stem(&m.model);
            files.insert(
                format!("tables/{stem}.similarity.csv"),
                crate::simeval::similarity_csv(&s.similarity_rows),
            );
            files.insert(
                format!("tables/{stem}.diffs.csv"),
                crate::simeval::diff_csv(&s.diff_rows),
            );
        }
    }
    if bundle.models.iter().any(|m| m.classifier.is_some()) {
        let (csv, json) = kappa_csv(bundle);
        files.insert("tables/kappa.csv".to_string(), csv);
        files.insert("tables/kappa.json".to_string(), json);
    }
    for (name, doc) in render_roc_svg(bundle) {
        files.insert(format!("figures/{name}"), doc);
    }
    for (name, doc) in render_boxplots_svg(bundle) {
        files.insert(format!("figures/{name}"), doc);
    }
    if let Some(doc) = render_kappa_bars_svg(bundle) {
        files.insert("figures/kappa_bars.svg".to_string(), doc);
    }
    files
}

/// Writes bundle.json plus all rendered tables and figures under `dir`.
/// Stale files from an earlier render of the same directory are replaced.
pub fn write_run_directory(dir: &Path, bundle: &EvaluationBundle) -> Result<()> {
    let mut bundle = bundle.clone();
    bundle.refresh_notes();
    bundle.validate()?;
    for sub in ["tables", "figures"] {
        let p = dir.join(sub);
        if p.exists() {
            fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let path = dir.join("bundle.json");
    fs::write(&path, bundle.to_json()).map_err(|e| Error::io(&path, e))?;
    for (rel, content) in render_all(&bundle) {
        let path = dir.join(rel);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::corpus::Corpus;
    use crate::embed::{EmbeddingCache, MockBackend};
    use crate::simeval::similarity_table;
    use crate::synthetic::synthetic_corpus;

    pub fn mock_bundle() -> EvaluationBundle {
        let roster = vec![ModelSpec::mock("mock-a", 8), ModelSpec::mock("mock-b", 24)];
        let corpus: Corpus = synthetic_corpus(40, 5);
        let mut bundle = EvaluationBundle::new(RunMetadata::new(5, "abc123", roster.clone()));
        for spec in &roster {
            let backend = MockBackend::from_spec(spec).unwrap();
            let rows = similarity_table(&corpus, spec, &backend, &mut EmbeddingCache::in_memory())
                .unwrap();
            bundle.model_mut(&spec.name).simeval = Some(SimevalResult::from_rows(rows).unwrap());
        }
        bundle
    }
}
