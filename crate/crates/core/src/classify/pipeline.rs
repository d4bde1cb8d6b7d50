use std::fmt;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cv::{stratified_folds, CvPlan};
use super::kernel::{Gram, KernelSpec};
use super::smo::SolverConfig;
use super::svm::{fit_ovr, predict_with, SubGram};
use crate::corpus::{PropositionRecord, RatingLabel};
use crate::embed::{embed_texts, EmbeddingBackend, EmbeddingCache, ModelSpec};
use crate::error::{Error, Result};
use crate::stats::{cohen_kappa, confusion_matrix, ConfusionMatrix};

pub const CLASSIFIER_SCHEMA: &str = "symbed-classifier/1";
pub const DEFAULT_FOLDS: usize = 5;

/// RBF width in the grid: either fixed or 1/dimension of the embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    InverseDim,
    Value(f64),
}

impl GammaSpec {
    pub fn resolve(self, dim: usize) -> f64 {
        match self {
            GammaSpec::InverseDim => 1.0 / dim as f64,
            GammaSpec::Value(g) => g,
        }
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::InverseDim => f.write_str("1/dim"),
            GammaSpec::Value(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Value(f64),
    Named(String),
}

impl Serialize for GammaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GammaSpec::InverseDim => GammaRepr::Named("1/dim".into()),
            GammaSpec::Value(g) => GammaRepr::Value(*g),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GammaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match GammaRepr::deserialize(d)? {
            GammaRepr::Value(g) => Ok(GammaSpec::Value(g)),
            GammaRepr::Named(s) if s == "1/dim" => Ok(GammaSpec::InverseDim),
            GammaRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "gamma must be a number or \"1/dim\", got {s:?}"
            ))),
        }
    }
}

/// Hyperparameter grid searched in the inner CV loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<GammaSpec>,
    /// Also try the linear kernel for every C.
    pub linear: bool,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma: vec![
                GammaSpec::InverseDim,
                GammaSpec::Value(0.01),
                GammaSpec::Value(0.1),
                GammaSpec::Value(1.0),
            ],
            linear: true,
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() {
            return Err(Error::Config("grid.c is empty".into()));
        }
        if let Some(c) = self.c.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!(
                "grid.c values must be positive, got {c}"
            )));
        }
        for g in &self.gamma {
            if let GammaSpec::Value(v) = g {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::Config(format!(
                        "grid.gamma values must be positive, got {v}"
                    )));
                }
            }
        }
        if self.gamma.is_empty() && !self.linear {
            return Err(Error::Config("grid has no kernels".into()));
        }
        Ok(())
    }

    /// Distinct kernels in search order: linear first, then the gammas.
    pub fn kernels(&self, dim: usize) -> Vec<KernelSpec> {
        let mut out = Vec::new();
        if self.linear {
            out.push(KernelSpec::Linear);
        }
        for g in &self.gamma {
            let k = KernelSpec::Rbf {
                gamma: g.resolve(dim),
            };
            if !out.contains(&k) {
                out.push(k);
            }
        }
        out
    }
}

/// Outcome of one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub kernel: KernelSpec,
    pub c: f64,
    /// Pooled κ of the chosen cell over the inner validation folds.
    pub inner_kappa: Option<f64>,
    /// κ on this fold's test records; `None` when undefined.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub schema: String,
    pub model: String,
    pub seed: u64,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub classes: Vec<String>,
    pub n_records: usize,
    pub n_textual: usize,
    pub n_symbolic: usize,
    pub kappa_overall: Option<f64>,
    pub kappa_textual: Option<f64>,
    pub kappa_symbolic: Option<f64>,
    /// Rows are true classes, columns predictions.
    pub confusion_overall: ConfusionMatrix,
    pub confusion_textual: ConfusionMatrix,
    pub confusion_symbolic: ConfusionMatrix,
    pub folds: Vec<FoldResult>,
    /// Out-of-fold prediction (class id) of every record, in input order.
    pub predictions: Vec<usize>,
    pub warnings: Vec<String>,
}

fn kappa_or_none(m: &ConfusionMatrix) -> Option<f64> {
    cohen_kappa(m).ok()
}

/// Unit-length copies of the embedding vectors.
pub fn l2_normalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    vectors
        .iter()
        .map(|v| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::ZeroNorm);
            }
            Ok(v.iter().map(|x| x / norm).collect())
        })
        .collect()
}

fn inner_seed(seed: u64, fold: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1)
}

/// Trains on `train` and predicts `test`, both index lists into `gram`.
fn fit_predict(
    gram: &Gram,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    c: f64,
    cfg: &SolverConfig,
) -> Result<Vec<usize>> {
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let (classes, machines) = fit_ovr(&SubGram { gram, idx: train }, &train_labels, c, cfg)?;
    Ok(test
        .iter()
        .map(|&v| predict_with(&classes, &machines, |t| gram.get(train[t], v)))
        .collect())
}

/// Features, labels and CV plan ready for nested cross-validation.
pub struct Dataset<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

/// Everything [`nested_cv`] produces besides the split κ values.
pub struct NestedCv {
    pub predictions: Vec<usize>,
    pub folds: Vec<FoldResult>,
}

/// Nested stratified cross-validation with grid search in the inner loop.
pub fn nested_cv(
    data: &Dataset<'_>,
    cv: &CvPlan,
    inner_folds: usize,
    grid: &HyperGrid,
    cfg: &SolverConfig,
) -> Result<NestedCv> {
    let n = data.features.len();
    let dim = data.features.first().map_or(0, Vec::len);
    let inner_products = Gram::inner_products(data.features);
    let kernels = grid.kernels(dim);
    let grams: Vec<Gram> = kernels
        .par_iter()
        .map(|k| Ok(inner_products.apply(k.build()?.as_ref())))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, f64)> = (0..kernels.len())
        .flat_map(|k| grid.c.iter().map(move |&c| (k, c)))
        .collect();

    let folds: Vec<(FoldResult, Vec<(usize, usize)>)> = (0..cv.k)
        .into_par_iter()
        .map(|fold| {
            let train = cv.train_indices(fold);
            let test = cv.test_indices(fold);
            let train_labels: Vec<usize> = train.iter().map(|&i| data.labels[i]).collect();
            let inner = stratified_folds(&train_labels, inner_folds, inner_seed(cv.seed, fold))?;

            let scores: Vec<Option<f64>> = cells
                .par_iter()
                .map(|&(k, c)| {
                    let mut truth = Vec::new();
                    let mut pred = Vec::new();
                    for f in 0..inner.k {
                        let tr: Vec<usize> =
                            inner.train_indices(f).iter().map(|&i| train[i]).collect();
                        let va: Vec<usize> =
                            inner.test_indices(f).iter().map(|&i| train[i]).collect();
                        if va.is_empty() {
                            continue;
                        }
                        pred.extend(fit_predict(&grams[k], data.labels, &tr, &va, c, cfg)?);
                        truth.extend(va.iter().map(|&i| data.labels[i]));
                    }
                    Ok(kappa_or_none(&confusion_matrix(
                        &truth,
                        &pred,
                        data.n_classes,
                    )))
                })
                .collect::<Result<_>>()?;

            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if s.unwrap_or(f64::NEG_INFINITY) > scores[best].unwrap_or(f64::NEG_INFINITY) {
                    best = i;
                }
            }
            let (k, c) = cells[best];
            debug!(
                "fold {fold}: chose {} C={c} (inner kappa {:?})",
                kernels[k], scores[best]
            );
            let pred = fit_predict(&grams[k], data.labels, &train, &test, c, cfg)?;
            let truth: Vec<usize> = test.iter().map(|&i| data.labels[i]).collect();
            let result = FoldResult {
                fold,
                n_train: train.len(),
                n_test: test.len(),
                kernel: kernels[k],
                c,
                inner_kappa: scores[best],
                kappa: kappa_or_none(&confusion_matrix(&truth, &pred, data.n_classes)),
            };
            Ok((result, test.into_iter().zip(pred).collect()))
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![0; n];
    let mut results = Vec::with_capacity(folds.len());
    for (result, pairs) in folds {
        for (i, p) in pairs {
            predictions[i] = p;
        }
        results.push(result);
    }
    Ok(NestedCv {
        predictions,
        folds: results,
    })
}

/// CV plan over the rating labels of `props`.
pub fn plan_for(props: &[PropositionRecord], k: usize, seed: u64) -> Result<CvPlan> {
    let labels: Vec<usize> = props.iter().map(|p| p.label.class_id()).collect();
    stratified_folds(&labels, k, seed)
}

/// Model-independent preconditions of [`run_pipeline`]: the plan covers the
/// records, at least two classes occur and each has a record per fold.
pub fn check_inputs(props: &[PropositionRecord], cv: &CvPlan, inner_folds: usize) -> Result<()> {
    if cv.assignments.len() != props.len() {
        return Err(Error::InvalidInput(format!(
            "CV plan covers {} records, got {}",
            cv.assignments.len(),
            props.len()
        )));
    }
    let mut counts = vec![0usize; RatingLabel::ALL.len()];
    for p in props {
        counts[p.label.class_id()] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::InvalidInput(
            "propositions contain a single rating class".into(),
        ));
    }
    let folds = cv.k.max(inner_folds);
    for (class, &count) in counts.iter().enumerate() {
        if count > 0 && count < folds {
            return Err(Error::InvalidInput(format!(
                "class {} has {count} records, fewer than the {folds} folds",
                RatingLabel::ALL[class].as_str()
            )));
        }
    }
    Ok(())
}

/// Embeds every proposition's full text with `spec`, then evaluates the SVM
/// by nested cross-validation and reports κ overall and per response type.
pub fn run_pipeline(
    props: &[PropositionRecord],
    spec: &ModelSpec,
    backend: &dyn EmbeddingBackend,
    cache: &mut EmbeddingCache,
    cv: &CvPlan,
    inner_folds: usize,
    grid: &HyperGrid,
) -> Result<ClassifierReport> {
    grid.validate()?;
    check_inputs(props, cv, inner_folds)?;
    let labels: Vec<usize> = props.iter().map(|p| p.label.class_id()).collect();
    let n_classes = RatingLabel::ALL.len();

    let texts: Vec<String> = props.iter().map(PropositionRecord::full_text).collect();
    let vectors = embed_texts(backend, spec, &texts, cache).map_err(|e| match e.text_index() {
        Some(i) => Error::AtRecord {
            id: props[i].id.clone(),
            source: Box::new(e),
        },
        None => e,
    })?;
    let raw: Vec<Vec<f64>> = vectors.into_iter().map(|v| v.values).collect();
    let features = l2_normalize(&raw)?;

    let data = Dataset {
        features: &features,
        labels: &labels,
        n_classes,
    };
    let out = nested_cv(&data, cv, inner_folds, grid, &SolverConfig::default())?;

    let split = |keep: &dyn Fn(&PropositionRecord) -> bool| {
        let (truth, pred): (Vec<usize>, Vec<usize>) = props
            .iter()
            .zip(&labels)
            .zip(&out.predictions)
            .filter(|((p, _), _)| keep(p))
            .map(|((_, &t), &p)| (t, p))
            .unzip();
        confusion_matrix(&truth, &pred, n_classes)
    };
    let confusion_overall = split(&|_| true);
    let confusion_textual = split(&|p| !p.contains_symbolic);
    let confusion_symbolic = split(&|p| p.contains_symbolic);
    let n_symbolic = props.iter().filter(|p| p.contains_symbolic).count();

    let report = ClassifierReport {
        schema: CLASSIFIER_SCHEMA.to_string(),
        model: spec.name.clone(),
        seed: cv.seed,
        outer_folds: cv.k,
        inner_folds,
        classes: RatingLabel::ALL
            .iter()
            .map(|l| l.as_str().to_string())
            .collect(),
        n_records: props.len(),
        n_textual: props.len() - n_symbolic,
        n_symbolic,
        kappa_overall: kappa_or_none(&confusion_overall),
        kappa_textual: kappa_or_none(&confusion_textual),
        kappa_symbolic: kappa_or_none(&confusion_symbolic),
        confusion_overall,
        confusion_textual,
        confusion_symbolic,
        folds: out.folds,
        predictions: out.predictions,
        warnings: cv.warnings.clone(),
    };
    info!(
        "{}: kappa overall {:?}, textual {:?}, symbolic {:?}",
        report.model, report.kappa_overall, report.kappa_textual, report.kappa_symbolic
    );
    Ok(report)
}
