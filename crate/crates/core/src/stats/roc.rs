use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// (false positive rate, true positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_scores(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidInput(format!("{name} scores are empty")));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} scores contain a non-finite value"
        )));
    }
    Ok(())
}

/// ROC curve of `correct` (positives) against `incorrect` (negatives).
///
/// The threshold sweeps +inf, every distinct observed score in descending
/// order, then -inf; a score is called positive when it strictly exceeds the
/// threshold. Tied scores therefore move the curve diagonally, which gives
/// ties half credit in the area.
pub fn roc_auc(correct: &[f64], incorrect: &[f64]) -> Result<RocResult> {
    check_scores("correct", correct)?;
    check_scores("incorrect", incorrect)?;

    let mut scored: Vec<(f64, bool)> = correct
        .iter()
        .map(|&s| (s, true))
        .chain(incorrect.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n_pos = correct.len();
    let n_neg = incorrect.len();
    let (pos, neg) = (n_pos as f64, n_neg as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        // Lowering the threshold below this score admits the whole tie group.
        let s = scored[i].0;
        while i < scored.len() && scored[i].0 == s {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg, tp as f64 / pos));
    }
    debug_assert_eq!(points.last(), Some(&(1.0, 1.0)));

    let auc = trapezoid_area(&points);
    debug_assert!((auc - mann_whitney_auc(correct, incorrect)).abs() < 1e-9);
    Ok(RocResult {
        points,
        auc,
        n_pos,
        n_neg,
    })
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// AUC via the rank-sum identity: P(correct > incorrect) + ½ P(tie).
pub fn mann_whitney_auc(correct: &[f64], incorrect: &[f64]) -> f64 {
    let mut sorted_neg = incorrect.to_vec();
    sorted_neg.sort_by(f64::total_cmp);
    let mut twice_wins = 0u64;
    for &c in correct {
        let below = sorted_neg.partition_point(|&n| n < c);
        let not_above = sorted_neg.partition_point(|&n| n <= c);
        twice_wins += 2 * below as u64 + (not_above - below) as u64;
    }
    twice_wins as f64 / (2.0 * correct.len() as f64 * incorrect.len() as f64)
}
