use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold assignment for stratified k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every record, in record order.
    pub assignments: Vec<usize>,
    /// Classes smaller than `k` leave some folds without that class.
    pub warnings: Vec<String>,
}

impl CvPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

/// Shuffles each class with a seeded ChaCha8 stream (classes in ascending
/// id order), then deals its members round-robin over the folds. The dealer
/// position carries over from one class to the next so fold sizes stay
/// balanced overall.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("no labels to split".into()));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; labels.len()];
    let mut warnings = Vec::new();
    let mut dealer = 0;
    for (class, members) in &mut by_class {
        if members.len() < k {
            warnings.push(format!(
                "class {class} has {} records for {k} folds; some folds lack it",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = dealer % k;
            dealer += 1;
        }
    }
    Ok(CvPlan {
        k,
        seed,
        assignments,
        warnings,
    })
}
