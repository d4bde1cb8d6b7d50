//! Seeded synthetic datasets for offline runs and tests.
//!
//! [`separable_propositions`] draws proposition texts and labels each one by
//! the argmax of the first four mock-embedding components, keeping only texts
//! whose winning component leads the runner-up by a margin. Every mock model
//! that shares the seed shares those components, so the labels are a linear
//! function of each model's embedding.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Corpus, PairRecord, PropositionRecord, RatingLabel, TaskSource, DEFAULT_OFF_TOPIC,
};
use crate::embed::mock_values;

/// Minimum lead of the winning label component over the runner-up.
pub const LABEL_MARGIN: f64 = 0.5;

/// Share of symbolic propositions, roughly one in six.
pub const SYMBOLIC_SHARE: f64 = 1.0 / 6.0;

const CONCEPTS: &[&str] = &[
    "force",
    "mass",
    "acceleration",
    "velocity",
    "kinetic energy",
    "potential energy",
    "momentum",
    "free fall",
    "friction",
    "work",
    "power",
    "gravitational field",
];

const LINKS: &[&str] = &[
    "increases with",
    "is proportional to",
    "depends on",
    "causes",
    "is conserved in",
    "is measured in relation to",
];

const FORMULAS: &[&str] = &[
    "F = m*a",
    "E = m*g*h",
    "v = a*t",
    "p = m*v",
    "W = F*s",
    "P = W/t",
];

fn label_of(values: &[f64]) -> Option<RatingLabel> {
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    (values[order[0]] - values[order[1]] >= LABEL_MARGIN).then(|| RatingLabel::ALL[order[0]])
}

/// `n` propositions, as balanced over the four labels as `n` allows, whose
/// labels are separable under any mock model with `mock_seed`.
pub fn separable_propositions(n: usize, seed: u64, mock_seed: u64) -> Vec<PropositionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quota: Vec<usize> = (0..4).map(|k| n / 4 + usize::from(k < n % 4)).collect();
    let mut filled = [0usize; 4];
    let mut out = Vec::with_capacity(n);
    let mut candidate = 0u64;
    while out.len() < n {
        candidate += 1;
        let symbolic = rng.random_bool(SYMBOLIC_SHARE);
        let concept_a = CONCEPTS.choose(&mut rng).expect("non-empty");
        let concept_b = CONCEPTS.choose(&mut rng).expect("non-empty");
        let link = if symbolic {
            FORMULAS.choose(&mut rng)
        } else {
            LINKS.choose(&mut rng)
        }
        .expect("non-empty");
        let rec = PropositionRecord {
            id: String::new(),
            concept_a: concept_a.to_string(),
            link_text: link.to_string(),
            concept_b: format!("{concept_b} (case {candidate})"),
            label: RatingLabel::Wrong,
            contains_symbolic: symbolic,
        };
        let Some(label) = label_of(&mock_values(&rec.full_text(), 4, mock_seed)) else {
            continue;
        };
        let k = label.class_id();
        if filled[k] == quota[k] {
            continue;
        }
        filled[k] += 1;
        out.push(PropositionRecord {
            id: format!("prop-{:04}", out.len() + 1),
            label,
            ..rec
        });
    }
    out
}

/// `n` expression-text pair records, half from each task type; every fourth
/// record has no related concepts.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quantities = [
        ("v", "velocity"),
        ("a", "acceleration"),
        ("F", "force"),
        ("E", "energy"),
        ("p", "momentum"),
        ("s", "distance"),
    ];
    let records = (0..n)
        .map(|i| {
            let (lhs, lhs_name) = quantities[rng.random_range(0..quantities.len())];
            let (x, x_name) = quantities[rng.random_range(0..quantities.len())];
            let (y, y_name) = quantities[rng.random_range(0..quantities.len())];
            let k: u32 = rng.random_range(2..10);
            let related = i % 4 != 3;
            PairRecord {
                id: format!("se-{:04}", i + 1),
                task_source: if i < n / 2 {
                    TaskSource::ConceptMap
                } else {
                    TaskSource::ProblemSolving
                },
                se: format!("{lhs}={k}*{x}*{y}"),
                lt: format!("{lhs_name} equals {k} times {x_name} times {y_name}"),
                ilt: format!("{lhs_name} equals {k} times {x_name} divided by {y_name}"),
                rc: related.then(|| format!("relation between {lhs_name} and {x_name}")),
                irc: related.then(|| format!("conservation of {y_name}")),
                ot: DEFAULT_OFF_TOPIC.to_string(),
            }
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("source".to_string(), format!("synthetic, seed {seed}"));
    metadata.insert("language".to_string(), "en".to_string());
    Corpus { records, metadata }
}
