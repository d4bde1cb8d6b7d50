//! Cosine similarities for the five pair categories, paired differences and
//! per-category distribution summaries.
//!
//! Quartiles use linear interpolation between closest ranks ("type 7"):
//! for sorted values `x[0..n]` and probability `p`, `h = (n - 1) p` and
//! `Q(p) = x[⌊h⌋] + (h − ⌊h⌋)(x[⌊h⌋+1] − x[⌊h⌋])`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::{embed_texts, EmbeddingBackend, EmbeddingCache, EmbeddingVector, ModelSpec};
use crate::error::{Error, Result};
use crate::stats::Comparison;

pub const QUARTILE_METHOD: &str = "linear interpolation between closest ranks (type 7)";

/// Above this length dot products switch to pairwise summation.
const PAIRWISE_THRESHOLD: usize = 4096;
const PAIRWISE_BLOCK: usize = 256;

const CLAMP_SLACK: f64 = 1e-9;

fn dot_naive(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_pairwise(a: &[f64], b: &[f64]) -> f64 {
    if a.len() <= PAIRWISE_BLOCK {
        return dot_naive(a, b);
    }
    let mid = a.len() / 2;
    dot_pairwise(&a[..mid], &b[..mid]) + dot_pairwise(&a[mid..], &b[mid..])
}

/// Inner product; pairwise summation for long vectors.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() > PAIRWISE_THRESHOLD {
        dot_pairwise(a, b)
    } else {
        dot_naive(a, b)
    }
}

/// ⟨a,b⟩ / (‖a‖·‖b‖). Zero-norm input is an error, never similarity 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::VectorDimensions {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = dot(a, a);
    let nb = dot(b, b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let s = dot(a, b) / (na.sqrt() * nb.sqrt());
    Ok(if s.abs() > 1.0 && s.abs() <= 1.0 + CLAMP_SLACK {
        s.signum()
    } else {
        s
    })
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    cosine(&a.values, &b.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "ILT")]
    Ilt,
    #[serde(rename = "RC")]
    Rc,
    #[serde(rename = "IRC")]
    Irc,
    #[serde(rename = "OT")]
    Ot,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Lt,
        Category::Ilt,
        Category::Rc,
        Category::Irc,
        Category::Ot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Lt => "LT",
            Category::Ilt => "ILT",
            Category::Rc => "RC",
            Category::Irc => "IRC",
            Category::Ot => "OT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub record_id: String,
    pub model: String,
    pub s_lt: f64,
    pub s_ilt: f64,
    pub s_rc: Option<f64>,
    pub s_irc: Option<f64>,
    pub s_ot: f64,
}

impl SimilarityRow {
    pub fn get(&self, c: Category) -> Option<f64> {
        match c {
            Category::Lt => Some(self.s_lt),
            Category::Ilt => Some(self.s_ilt),
            Category::Rc => self.s_rc,
            Category::Irc => self.s_irc,
            Category::Ot => Some(self.s_ot),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub record_id: String,
    pub model: String,
    pub d_lt_ilt: f64,
    pub d_rc_irc: Option<f64>,
}

impl DiffRow {
    pub fn get(&self, c: Comparison) -> Option<f64> {
        match c {
            Comparison::LtVsIlt => Some(self.d_lt_ilt),
            Comparison::RcVsIrc => self.d_rc_irc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub category: Category,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSummary {
    pub comparison: Comparison,
    #[serde(flatten)]
    pub summary: Summary,
}

/// Type-7 quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Summary {
        n: v.len(),
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

/// Computes the similarity row of every record under one model.
///
/// All distinct texts of the corpus are embedded in one pass; rows keep
/// corpus order.
pub fn similarity_table(
    corpus: &Corpus,
    spec: &ModelSpec,
    backend: &dyn EmbeddingBackend,
    cache: &mut EmbeddingCache,
) -> Result<Vec<SimilarityRow>> {
    let mut texts = Vec::new();
    let mut owner = Vec::new();
    for (r, rec) in corpus.records.iter().enumerate() {
        let mut push = |t: &String| {
            texts.push(t.clone());
            owner.push(r);
        };
        push(&rec.se);
        push(&rec.lt);
        push(&rec.ilt);
        if let (Some(rc), Some(irc)) = (&rec.rc, &rec.irc) {
            push(rc);
            push(irc);
        }
        push(&rec.ot);
    }
    let vectors = embed_texts(backend, spec, &texts, cache).map_err(|e| match e.text_index() {
        Some(i) => Error::AtRecord {
            id: corpus.records[owner[i]].id.clone(),
            source: Box::new(e),
        },
        None => e,
    })?;

    let mut starts = Vec::with_capacity(corpus.records.len());
    let mut at = 0;
    for rec in &corpus.records {
        starts.push(at);
        at += if rec.has_related_concepts() { 6 } else { 4 };
    }

    corpus
        .records
        .par_iter()
        .zip(starts.par_iter())
        .map(|(rec, &start)| {
            let v = &vectors[start..];
            let sim = |k: usize| {
                cosine_similarity(&v[0], &v[k]).map_err(|e| Error::AtRecord {
                    id: rec.id.clone(),
                    source: Box::new(e),
                })
            };
            let (s_rc, s_irc, ot_at) = if rec.has_related_concepts() {
                (Some(sim(3)?), Some(sim(4)?), 5)
            } else {
                (None, None, 3)
            };
            Ok(SimilarityRow {
                record_id: rec.id.clone(),
                model: spec.name.clone(),
                s_lt: sim(1)?,
                s_ilt: sim(2)?,
                s_rc,
                s_irc,
                s_ot: sim(ot_at)?,
            })
        })
        .collect()
}

pub fn diff_table(rows: &[SimilarityRow]) -> Vec<DiffRow> {
    rows.iter()
        .map(|r| DiffRow {
            record_id: r.record_id.clone(),
            model: r.model.clone(),
            d_lt_ilt: r.s_lt - r.s_ilt,
            d_rc_irc: match (r.s_rc, r.s_irc) {
                (Some(a), Some(b)) => Some(a - b),
                _ => None,
            },
        })
        .collect()
}

pub fn category_values(rows: &[SimilarityRow], c: Category) -> Vec<f64> {
    rows.iter().filter_map(|r| r.get(c)).collect()
}

pub fn diff_values(rows: &[DiffRow], c: Comparison) -> Vec<f64> {
    rows.iter().filter_map(|r| r.get(c)).collect()
}

pub fn category_summaries(rows: &[SimilarityRow]) -> Vec<DistributionSummary> {
    Category::ALL
        .iter()
        .filter_map(|&category| {
            summarize(&category_values(rows, category))
                .map(|summary| DistributionSummary { category, summary })
        })
        .collect()
}

pub fn diff_summaries(rows: &[DiffRow]) -> Vec<DiffSummary> {
    Comparison::ALL
        .iter()
        .filter_map(|&comparison| {
            summarize(&diff_values(rows, comparison)).map(|summary| DiffSummary {
                comparison,
                summary,
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with header `record_id,model,s_lt,s_ilt,s_rc,s_irc,s_ot`; absent values are empty.
pub fn similarity_csv(rows: &[SimilarityRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "record_id",
        "model",
        "s_lt",
        "s_ilt",
        "s_rc",
        "s_irc",
        "s_ot",
    ])
    .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.record_id.clone(),
            r.model.clone(),
            r.s_lt.to_string(),
            r.s_ilt.to_string(),
            opt(r.s_rc),
            opt(r.s_irc),
            r.s_ot.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// CSV with header `record_id,model,d_lt_ilt,d_rc_irc`.
pub fn diff_csv(rows: &[DiffRow]) -> String {
    let mut out = String::from("record_id,model,d_lt_ilt,d_rc_irc\n");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in rows {
        w.write_record([
            r.record_id.clone(),
            r.model.clone(),
            r.d_lt_ilt.to_string(),
            opt(r.d_rc_irc),
        ])
        .expect("in-memory write");
    }
    let _ = write!(
        out,
        "{}",
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    );
    out
}
