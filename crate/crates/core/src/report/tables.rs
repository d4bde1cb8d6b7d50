use serde::Serialize;

use super::EvaluationBundle;
use crate::stats::significance_stars;

/// Rounds to two decimals, never printing a negative zero.
pub(crate) fn fixed2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// 0.91 → "91%".
pub fn format_percent(p: f64) -> String {
    let s = format!("{:.0}%", p * 100.0);
    if s == "-0%" {
        "0%".to_string()
    } else {
        s
    }
}

pub fn format_effect(d: f64) -> String {
    fixed2(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Row {
    pub model: String,
    pub comparison: String,
    pub n_pairs: usize,
    pub prop: String,
    pub p: f64,
    pub stars: String,
    pub d: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table3 {
    pub rows: Vec<Table3Row>,
    pub csv: String,
    pub json: String,
}

/// Instance-based comparison table: one row per model and comparison.
pub fn render_table3(bundle: &EvaluationBundle) -> Table3 {
    let mut rows = Vec::new();
    for m in &bundle.models {
        let Some(s) = &m.simeval else { continue };
        for t in &s.tests {
            rows.push(Table3Row {
                model: m.model.clone(),
                comparison: t.comparison.as_str().to_string(),
                n_pairs: t.n_pairs,
                prop: format_percent(t.proportion_correct),
                p: t.p_value,
                stars: significance_stars(t.p_value).to_string(),
                d: format_effect(t.effect_size_d),
            });
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "comparison", "n_pairs", "prop", "p", "stars", "d"])
        .expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.model.clone(),
            r.comparison.clone(),
            r.n_pairs.to_string(),
            r.prop.clone(),
            r.p.to_string(),
            r.stars.clone(),
            r.d.clone(),
        ])
        .expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    let mut json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    json.push('\n');
    Table3 { rows, csv, json }
}

/// Five-number summaries of every category and difference, all models.
pub fn summaries_csv(bundle: &EvaluationBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model", "series", "n", "min", "q1", "median", "q3", "max", "mean",
    ])
    .expect("in-memory write");
    for m in &bundle.models {
        let Some(s) = &m.simeval else { continue };
        let series = s
            .category_summaries
            .iter()
            .map(|d| (d.category.as_str().to_string(), &d.summary))
            .chain(
                s.diff_summaries
                    .iter()
                    .map(|d| (d.comparison.as_str().to_string(), &d.summary)),
            );
        for (name, x) in series {
            w.write_record([
                m.model.clone(),
                name,
                x.n.to_string(),
                x.min.to_string(),
                x.q1.to_string(),
                x.median.to_string(),
                x.q3.to_string(),
                x.max.to_string(),
                x.mean.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[derive(Serialize)]
struct KappaRow<'a> {
    model: &'a str,
    kappa_overall: Option<f64>,
    kappa_textual: Option<f64>,
    kappa_symbolic: Option<f64>,
    n_textual: usize,
    n_symbolic: usize,
}

/// κ per model and response type, as CSV and JSON.
pub fn kappa_csv(bundle: &EvaluationBundle) -> (String, String) {
    let rows: Vec<KappaRow<'_>> = bundle
        .models
        .iter()
        .filter_map(|m| {
            m.classifier.as_ref().map(|c| KappaRow {
                model: &m.model,
                kappa_overall: c.kappa_overall,
                kappa_textual: c.kappa_textual,
                kappa_symbolic: c.kappa_symbolic,
                n_textual: c.n_textual,
                n_symbolic: c.n_symbolic,
            })
        })
        .collect();
    let cell = |k: Option<f64>| k.map(fixed2).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "kappa_overall",
        "kappa_textual",
        "kappa_symbolic",
        "n_textual",
        "n_symbolic",
    ])
    .expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.model.to_string(),
            cell(r.kappa_overall),
            cell(r.kappa_textual),
            cell(r.kappa_symbolic),
            r.n_textual.to_string(),
            r.n_symbolic.to_string(),
        ])
        .expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    let mut json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    json.push('\n');
    (csv, json)
}
