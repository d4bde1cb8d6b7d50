//! Static SVG figures. Every coordinate is printed with two decimals and
//! element order follows the bundle, so output bytes are reproducible.

use std::fmt::Write as _;

use super::tables::fixed2;
use super::EvaluationBundle;
use crate::classify::ClassifierReport;
use crate::simeval::{Category, Summary};
use crate::stats::Comparison;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn n(x: f64) -> String {
    fixed2(x)
}

struct Doc {
    s: String,
}

impl Doc {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = n(width),
            h = n(height)
        );
        let _ = writeln!(s, "<title>{}</title>", esc(title));
        let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
        Doc { s }
    }

    fn line(&mut self, (x1, y1): (f64, f64), (x2, y2): (f64, f64), stroke: &str, attrs: &str) {
        let _ = writeln!(
            self.s,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}"{attrs}/>"#,
            n(x1),
            n(y1),
            n(x2),
            n(y2)
        );
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, attrs: &str) {
        let _ = writeln!(
            self.s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{fill}"{attrs}/>"#,
            n(x),
            n(y),
            n(w),
            n(h)
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, content: &str, attrs: &str) {
        let _ = writeln!(
            self.s,
            r#"<text x="{}" y="{}" text-anchor="{anchor}"{attrs}>{}</text>"#,
            n(x),
            n(y),
            esc(content)
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, attrs: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|(x, y)| format!("{},{}", n(*x), n(*y)))
            .collect();
        let _ = writeln!(
            self.s,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"{attrs}/>"#,
            pts.join(" ")
        );
    }

    fn finish(mut self) -> String {
        self.s.push_str("</svg>\n");
        self.s
    }
}

/// Plot area with a linear y scale.
struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
    lo: f64,
    hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        let t = (v.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo);
        self.bottom - t * (self.bottom - self.top)
    }

    fn y_axis(&self, doc: &mut Doc, ticks: &[f64], label: &str) {
        for &t in ticks {
            let y = self.y(t);
            doc.line((self.left, y), (self.right, y), "#e0e0e0", "");
            doc.line((self.left - 4.0, y), (self.left, y), "#000000", "");
            doc.text(self.left - 7.0, y + 4.0, "end", &fixed2(t), "");
        }
        doc.line(
            (self.left, self.top),
            (self.left, self.bottom),
            "#000000",
            "",
        );
        doc.line(
            (self.left, self.bottom),
            (self.right, self.bottom),
            "#000000",
            "",
        );
        let mid = (self.top + self.bottom) / 2.0;
        doc.text(
            self.left - 42.0,
            mid,
            "middle",
            label,
            &format!(
                r#" transform="rotate(-90 {} {})""#,
                n(self.left - 42.0),
                n(mid)
            ),
        );
    }
}

fn ticks(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let k = ((hi - lo) / step).round() as usize;
    (0..=k).map(|i| lo + step * i as f64).collect()
}

fn rotated_label(doc: &mut Doc, x: f64, y: f64, text: &str) {
    doc.text(
        x,
        y,
        "end",
        text,
        &format!(r#" transform="rotate(-30 {} {})""#, n(x), n(y)),
    );
}

/// One ROC figure per comparison; legend entries ordered by AUC, highest
/// first (ties by model name).
pub fn render_roc_svg(bundle: &EvaluationBundle) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for cmp in Comparison::ALL {
        let mut curves: Vec<(usize, &str, &crate::stats::RocResult)> = bundle
            .models
            .iter()
            .enumerate()
            .filter_map(|(i, m)| {
                let roc = m.simeval.as_ref()?.roc(cmp)?;
                Some((i, m.model.as_str(), roc))
            })
            .collect();
        if curves.is_empty() {
            continue;
        }
        curves.sort_by(|a, b| b.2.auc.total_cmp(&a.2.auc).then_with(|| a.1.cmp(b.1)));

        let (left, top, size) = (70.0, 40.0, 360.0);
        let width = left + size + 320.0;
        let height = top + size + 60.0;
        let mut doc = Doc::new(width, height, &format!("ROC: {}", cmp.title()));
        let f = Frame {
            left,
            top,
            right: left + size,
            bottom: top + size,
            lo: 0.0,
            hi: 1.0,
        };
        let x = |v: f64| left + v * size;
        doc.text(
            left + size / 2.0,
            24.0,
            "middle",
            cmp.title(),
            r#" font-size="14""#,
        );
        f.y_axis(&mut doc, &ticks(0.0, 1.0, 0.2), "true positive rate");
        for t in ticks(0.0, 1.0, 0.2) {
            doc.line((x(t), f.bottom), (x(t), f.bottom + 4.0), "#000000", "");
            doc.text(x(t), f.bottom + 18.0, "middle", &fixed2(t), "");
        }
        doc.text(
            left + size / 2.0,
            f.bottom + 40.0,
            "middle",
            "false positive rate",
            "",
        );
        doc.line(
            (x(0.0), f.y(0.0)),
            (x(1.0), f.y(1.0)),
            "#888888",
            r#" stroke-dasharray="6 4" class="chance""#,
        );
        for (rank, (i, model, roc)) in curves.iter().enumerate() {
            let pts: Vec<(f64, f64)> = roc
                .points
                .iter()
                .map(|&(fpr, tpr)| (x(fpr), f.y(tpr)))
                .collect();
            doc.polyline(
                &pts,
                colour(*i),
                &format!(r#" class="roc" data-model="{}""#, esc(model)),
            );
            let ly = top + 10.0 + 20.0 * rank as f64;
            let lx = left + size + 24.0;
            doc.line(
                (lx, ly),
                (lx + 24.0, ly),
                colour(*i),
                r#" stroke-width="2""#,
            );
            doc.text(
                lx + 30.0,
                ly + 4.0,
                "start",
                &format!("{model}, AUC = {}", fixed2(roc.auc)),
                r#" class="legend""#,
            );
        }
        out.push((format!("roc_{}.svg", cmp.as_str()), doc.finish()));
    }
    out
}

fn draw_box(doc: &mut Doc, f: &Frame, cx: f64, half: f64, s: &Summary, fill: &str, tag: &str) {
    doc.line(
        (cx, f.y(s.min)),
        (cx, f.y(s.q1)),
        "#333333",
        r#" class="whisker""#,
    );
    doc.line(
        (cx, f.y(s.q3)),
        (cx, f.y(s.max)),
        "#333333",
        r#" class="whisker""#,
    );
    doc.line(
        (cx - half / 2.0, f.y(s.min)),
        (cx + half / 2.0, f.y(s.min)),
        "#333333",
        "",
    );
    doc.line(
        (cx - half / 2.0, f.y(s.max)),
        (cx + half / 2.0, f.y(s.max)),
        "#333333",
        "",
    );
    if s.q1 == s.q3 {
        doc.line(
            (cx - half, f.y(s.q1)),
            (cx + half, f.y(s.q1)),
            fill,
            &format!(r#" stroke-width="3" class="box degenerate"{tag}"#),
        );
    } else {
        let (y3, y1) = (f.y(s.q3), f.y(s.q1));
        doc.rect(
            cx - half,
            y3,
            2.0 * half,
            y1 - y3,
            fill,
            &format!(r##" stroke="#333333" class="box"{tag}"##),
        );
        doc.line(
            (cx - half, f.y(s.median)),
            (cx + half, f.y(s.median)),
            "#000000",
            r#" stroke-width="2" class="median""#,
        );
    }
}

fn boxplot_doc(
    title: &str,
    y_label: &str,
    groups: &[(&str, Vec<(String, &Summary)>)],
    series: &[&str],
    domain: (f64, f64),
    tick_step: f64,
    zero_line: bool,
) -> String {
    let per = series.len() as f64;
    let group_w = per * 22.0 + 30.0;
    let (left, top, plot_h) = (80.0, 40.0, 320.0);
    let plot_w = group_w * groups.len().max(1) as f64;
    let width = left + plot_w + 150.0;
    let height = top + plot_h + 130.0;
    let mut doc = Doc::new(width, height, title);
    let f = Frame {
        left,
        top,
        right: left + plot_w,
        bottom: top + plot_h,
        lo: domain.0,
        hi: domain.1,
    };
    doc.text(
        left + plot_w / 2.0,
        24.0,
        "middle",
        title,
        r#" font-size="14""#,
    );
    f.y_axis(&mut doc, &ticks(domain.0, domain.1, tick_step), y_label);
    if zero_line {
        doc.line(
            (f.left, f.y(0.0)),
            (f.right, f.y(0.0)),
            "#000000",
            r#" stroke-width="1.5" class="zero""#,
        );
    }
    for (g, (model, boxes)) in groups.iter().enumerate() {
        let gx = left + group_w * g as f64 + 15.0;
        for (name, s) in boxes {
            let k = series.iter().position(|x| x == name).unwrap_or(0);
            let cx = gx + 22.0 * k as f64 + 11.0;
            let tag = format!(
                r#" data-model="{}" data-series="{}""#,
                esc(model),
                esc(name)
            );
            draw_box(&mut doc, &f, cx, 8.0, s, colour(k), &tag);
        }
        rotated_label(&mut doc, gx + group_w / 2.0, f.bottom + 16.0, model);
    }
    for (k, name) in series.iter().enumerate() {
        let ly = top + 10.0 + 20.0 * k as f64;
        doc.rect(f.right + 20.0, ly - 9.0, 12.0, 12.0, colour(k), "");
        doc.text(
            f.right + 38.0,
            ly + 2.0,
            "start",
            name,
            r#" class="legend""#,
        );
    }
    doc.finish()
}

/// Similarity boxplots (five categories per model) and difference boxplots
/// with a zero reference line.
pub fn render_boxplots_svg(bundle: &EvaluationBundle) -> Vec<(String, String)> {
    let with_sim: Vec<_> = bundle
        .models
        .iter()
        .filter_map(|m| m.simeval.as_ref().map(|s| (m.model.as_str(), s)))
        .collect();
    if with_sim.is_empty() {
        return Vec::new();
    }
    let cats: Vec<&str> = Category::ALL.iter().map(|c| c.as_str()).collect();
    let groups: Vec<(&str, Vec<(String, &Summary)>)> = with_sim
        .iter()
        .map(|(model, s)| {
            let boxes = s
                .category_summaries
                .iter()
                .map(|d| (d.category.as_str().to_string(), &d.summary))
                .collect();
            (*model, boxes)
        })
        .collect();
    let sim = boxplot_doc(
        "Cosine similarity to the symbolic expression",
        "cosine similarity",
        &groups,
        &cats,
        (-1.0, 1.0),
        0.5,
        false,
    );

    let cmps: Vec<&str> = Comparison::ALL.iter().map(|c| c.as_str()).collect();
    let groups: Vec<(&str, Vec<(String, &Summary)>)> = with_sim
        .iter()
        .map(|(model, s)| {
            let boxes = s
                .diff_summaries
                .iter()
                .map(|d| (d.comparison.as_str().to_string(), &d.summary))
                .collect();
            (*model, boxes)
        })
        .collect();
    let extent = groups
        .iter()
        .flat_map(|(_, b)| b.iter().map(|(_, s)| s.min.abs().max(s.max.abs())))
        .fold(0.1f64, f64::max);
    let m = (extent * 10.0).ceil() / 10.0;
    let step = if m > 1.0 {
        0.5
    } else if m > 0.4 {
        0.2
    } else {
        0.1
    };
    let m = (m / step).ceil() * step;
    let diff = boxplot_doc(
        "Similarity difference, correct minus incorrect",
        "difference",
        &groups,
        &cmps,
        (-m, m),
        step,
        true,
    );
    vec![
        ("similarity_boxplots.svg".to_string(), sim),
        ("diff_boxplots.svg".to_string(), diff),
    ]
}

/// Paired κ bar charts, textual responses left and symbolic right. `None`
/// when no model has classifier results.
pub fn render_kappa_bars_svg(bundle: &EvaluationBundle) -> Option<String> {
    let reports: Vec<(usize, &str, &ClassifierReport)> = bundle
        .models
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.classifier.as_ref().map(|c| (i, m.model.as_str(), c)))
        .collect();
    if reports.is_empty() {
        return None;
    }
    let bar_w = 28.0;
    let panel_w = (bar_w + 16.0) * reports.len() as f64 + 30.0;
    let (left, top, plot_h, gap) = (70.0, 50.0, 300.0, 90.0);
    let width = left + 2.0 * panel_w + gap + 30.0;
    let height = top + plot_h + 150.0;
    let mut doc = Doc::new(width, height, "Cohen's kappa of the SVM classifier");
    type Panel = (
        &'static str,
        &'static str,
        fn(&ClassifierReport) -> Option<f64>,
    );
    let panels: [Panel; 2] = [
        ("textual", "textual responses", |c| c.kappa_textual),
        ("symbolic", "responses with symbolic expressions", |c| {
            c.kappa_symbolic
        }),
    ];
    for (p, (key, title, get)) in panels.iter().enumerate() {
        let x0 = left + p as f64 * (panel_w + gap);
        let f = Frame {
            left: x0,
            top,
            right: x0 + panel_w,
            bottom: top + plot_h,
            lo: 0.0,
            hi: 1.0,
        };
        doc.text(
            x0 + panel_w / 2.0,
            top - 16.0,
            "middle",
            title,
            r#" font-size="14""#,
        );
        f.y_axis(&mut doc, &ticks(0.0, 1.0, 0.2), "Cohen's kappa");
        for (k, (i, model, report)) in reports.iter().enumerate() {
            let bx = x0 + 15.0 + (bar_w + 16.0) * k as f64;
            let tag = format!(
                r#" class="bar" data-panel="{key}" data-model="{}""#,
                esc(model)
            );
            let label = match get(report) {
                Some(kappa) => {
                    let h = f.bottom - f.y(kappa.max(0.0));
                    doc.rect(bx, f.bottom - h, bar_w, h, colour(*i), &tag);
                    fixed2(kappa)
                }
                None => "n/a".to_string(),
            };
            let ly = f.y(get(report).unwrap_or(0.0).max(0.0)) - 5.0;
            doc.text(bx + bar_w / 2.0, ly, "middle", &label, r#" class="value""#);
            rotated_label(&mut doc, bx + bar_w / 2.0, f.bottom + 16.0, model);
        }
    }
    Some(doc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ClassifierReport;
    use crate::embed::ModelSpec;
    use crate::report::fixtures::mock_bundle;
    use crate::report::{RunMetadata, SimevalResult};
    use crate::simeval::{DiffSummary, SimilarityRow};
    use crate::stats::{roc_auc, RocResult};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Attribute value of the first element in `line`.
    fn attr(line: &str, name: &str) -> Option<f64> {
        let start = line.find(&format!(" {name}=\""))? + name.len() + 3;
        let end = start + line[start..].find('"')?;
        line[start..end].parse().ok()
    }

    fn classifier(model: &str, textual: Option<f64>, symbolic: Option<f64>) -> ClassifierReport {
        ClassifierReport {
            schema: crate::classify::CLASSIFIER_SCHEMA.into(),
            model: model.into(),
            seed: 0,
            outer_folds: 5,
            inner_folds: 5,
            classes: vec![],
            n_records: 0,
            n_textual: 0,
            n_symbolic: 0,
            kappa_overall: textual,
            kappa_textual: textual,
            kappa_symbolic: symbolic,
            confusion_overall: vec![],
            confusion_textual: vec![],
            confusion_symbolic: vec![],
            folds: vec![],
            predictions: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn kappa_bars_heights_and_labels() {
        let roster = vec![ModelSpec::mock("big", 4), ModelSpec::mock("neg", 4)];
        let mut b = EvaluationBundle::new(RunMetadata::new(0, "h", roster));
        b.model_mut("big").classifier = Some(classifier("big", Some(0.82), Some(0.68)));
        b.model_mut("neg").classifier = Some(classifier("neg", Some(0.0), Some(-0.12)));
        let svg = render_kappa_bars_svg(&b).unwrap();
        let bars: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains(r#"class="bar""#))
            .collect();
        assert_eq!(bars.len(), 4);
        // plot height is 300 px for kappa 0..1
        assert_eq!(attr(bars[0], "height"), Some(246.0));
        assert_eq!(attr(bars[2], "height"), Some(204.0));
        assert_eq!(attr(bars[1], "height"), Some(0.0));
        assert_eq!(attr(bars[3], "height"), Some(0.0));
        for label in ["0.82", "0.68", "0.00", "-0.12"] {
            assert!(
                svg.contains(&format!(r#"class="value">{label}</text>"#)),
                "{label}"
            );
        }
        b.models.iter_mut().for_each(|m| m.classifier = None);
        assert!(render_kappa_bars_svg(&b).is_none());
    }

    #[test]
    fn roc_legend_sorted_by_auc() {
        let b = mock_bundle();
        let figs = render_roc_svg(&b);
        assert_eq!(figs.len(), 2);
        for (_, svg) in &figs {
            let legend: Vec<&str> = svg
                .lines()
                .filter(|l| l.contains(r#"class="legend""#))
                .collect();
            assert_eq!(legend.len(), 2);
            let aucs: Vec<f64> = legend
                .iter()
                .map(|l| {
                    l.rsplit("AUC = ")
                        .next()
                        .unwrap()
                        .trim_end_matches("</text>")
                        .parse()
                        .unwrap()
                })
                .collect();
            assert!(aucs[0] >= aucs[1]);
            assert!(svg.contains(r#"stroke-dasharray="6 4" class="chance""#));
        }
    }

    fn with_roc(roc: RocResult) -> EvaluationBundle {
        let mut b = mock_bundle();
        b.models.truncate(1);
        b.models[0].simeval.as_mut().unwrap().roc_lt_vs_ilt = roc;
        b
    }

    #[test]
    fn perfect_separation_passes_through_top_left() {
        let roc = roc_auc(&[0.9, 0.8, 0.7], &[0.1, 0.2]).unwrap();
        assert_eq!(roc.auc, 1.0);
        let svg = &render_roc_svg(&with_roc(roc))[0].1;
        let curve = svg.lines().find(|l| l.contains(r#"class="roc""#)).unwrap();
        // (fpr 0, tpr 1) maps to the plot's top-left corner (70, 40)
        assert!(curve.contains(" 70.00,40.00 ") || curve.contains("\"70.00,40.00 "));
        assert!(svg.contains("AUC = 1.00"));
    }

    #[test]
    fn chance_roc_hugs_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let roc = roc_auc(&a, &b).unwrap();
        let dev = roc
            .points
            .iter()
            .map(|(x, y)| (y - x).abs())
            .fold(0.0, f64::max);
        assert!(dev < 0.1, "max deviation {dev}");
        assert!((roc.auc - 0.5).abs() < 0.02);
    }

    #[test]
    fn degenerate_box_is_a_line() {
        let rows: Vec<SimilarityRow> = (0..5)
            .map(|i| SimilarityRow {
                record_id: format!("r{i}"),
                model: "mock-a".into(),
                s_lt: 0.5,
                s_ilt: 0.1 * f64::from(i),
                s_rc: None,
                s_irc: None,
                s_ot: 0.0,
            })
            .collect();
        let mut b = mock_bundle();
        b.models.truncate(1);
        b.models[0].simeval = Some(SimevalResult::from_rows(rows).unwrap());
        let figs = render_boxplots_svg(&b);
        let sim = &figs[0].1;
        let lt = sim
            .lines()
            .find(|l| l.contains(r#"data-series="LT""#))
            .unwrap();
        assert!(lt.starts_with("<line") && lt.contains("degenerate"), "{lt}");
        let ilt = sim
            .lines()
            .find(|l| l.contains(r#"data-series="ILT""#))
            .unwrap();
        assert!(ilt.starts_with("<rect"));
    }

    #[test]
    fn positive_diffs_sit_above_zero_line() {
        let mut b = mock_bundle();
        b.models.truncate(1);
        let s = b.models[0].simeval.as_mut().unwrap();
        s.diff_summaries = vec![DiffSummary {
            comparison: Comparison::LtVsIlt,
            summary: Summary {
                n: 10,
                min: 0.05,
                q1: 0.1,
                median: 0.2,
                q3: 0.3,
                max: 0.4,
                mean: 0.2,
            },
        }];
        let figs = render_boxplots_svg(&b);
        let diff = &figs[1].1;
        let zero = diff
            .lines()
            .find(|l| l.contains(r#"class="zero""#))
            .unwrap();
        let zero_y = attr(zero, "y1").unwrap();
        let boxline = diff.lines().find(|l| l.contains(r#"class="box""#)).unwrap();
        let bottom = attr(boxline, "y").unwrap() + attr(boxline, "height").unwrap();
        assert!(bottom < zero_y, "box bottom {bottom} vs zero line {zero_y}");
    }

    #[test]
    fn golden_boxplots_are_stable() {
        let a = render_boxplots_svg(&mock_bundle());
        let b = render_boxplots_svg(&mock_bundle());
        assert_eq!(a, b);
        let golden = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/golden/diff_boxplots.svg"
        );
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(golden, &a[1].1).unwrap();
        }
        assert_eq!(a[1].1, std::fs::read_to_string(golden).unwrap());
    }

    #[test]
    fn text_is_escaped() {
        assert_eq!(esc(r#"a<b & "c""#), "a&lt;b &amp; &quot;c&quot;");
    }
}
