use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::Comparison;
use crate::error::{Error, Result};

/// Largest number of non-zero pairs for which the exact null distribution is used.
pub const EXACT_MAX_PAIRS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

/// Outcome of the one-sided ("correct minus incorrect is greater than zero")
/// signed-rank test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedRankTest {
    pub n_pairs: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: TestMethod,
}

/// One row of the instance-based comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub comparison: Comparison,
    /// All differences, zeros included.
    pub n_total: usize,
    /// Differences left after zero removal.
    pub n_pairs: usize,
    pub proportion_correct: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub effect_size_d: f64,
    pub method: TestMethod,
}

/// Non-zero differences ranked by absolute value, with average ranks for
/// ties. Ranks are stored doubled so they stay integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    pub twice_ranks: Vec<u64>,
    pub positive: Vec<bool>,
    /// Sizes of groups of tied absolute values (only groups larger than 1).
    pub tie_sizes: Vec<usize>,
}

impl SignedRanks {
    pub fn len(&self) -> usize {
        self.twice_ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twice_ranks.is_empty()
    }

    /// Doubled positive and negative rank sums.
    fn twice_sums(&self) -> (u64, u64) {
        let mut plus = 0;
        let mut minus = 0;
        for (r, pos) in self.twice_ranks.iter().zip(&self.positive) {
            if *pos {
                plus += r;
            } else {
                minus += r;
            }
        }
        (plus, minus)
    }

    pub fn rank_sums(&self) -> (f64, f64) {
        let (p, m) = self.twice_sums();
        (p as f64 / 2.0, m as f64 / 2.0)
    }
}

pub fn signed_ranks(diffs: &[f64]) -> Result<SignedRanks> {
    if let Some(d) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite difference {d}")));
    }
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = nz.len();
    let mut twice_ranks = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && nz[j].abs() == nz[i].abs() {
            j += 1;
        }
        // positions i+1..=j share rank (i+1+j)/2
        let twice = (i + 1 + j) as u64;
        twice_ranks[i..j].fill(twice);
        if j - i > 1 {
            tie_sizes.push(j - i);
        }
        i = j;
    }
    Ok(SignedRanks {
        twice_ranks,
        positive: nz.iter().map(|d| *d > 0.0).collect(),
        tie_sizes,
    })
}

/// Paired one-sided Wilcoxon signed-rank test of "differences tend to be
/// positive".
///
/// Zeros are dropped before ranking. Up to [`EXACT_MAX_PAIRS`] remaining pairs
/// the p-value P(W+ >= observed) counts all 2^n sign assignments of the
/// (tie-averaged) ranks, tallied through a subset-sum table over doubled
/// ranks. Above that it uses the normal approximation with tie-corrected
/// variance and a 0.5 continuity correction.
pub fn wilcoxon_one_sided(diffs: &[f64]) -> Result<SignedRankTest> {
    if diffs.is_empty() {
        return Err(Error::InvalidInput("no differences".into()));
    }
    let ranked = signed_ranks(diffs)?;
    if ranked.is_empty() {
        return Err(Error::Degenerate(
            "all differences are zero; signed-rank test undefined".into(),
        ));
    }
    let n = ranked.len();
    let (twice_plus, _) = ranked.twice_sums();
    let (w_plus, w_minus) = ranked.rank_sums();

    let (p, method) = if n <= EXACT_MAX_PAIRS {
        (
            exact_upper_tail(&ranked.twice_ranks, twice_plus),
            TestMethod::Exact,
        )
    } else {
        (normal_upper_tail(&ranked, w_plus), TestMethod::NormalApprox)
    };
    Ok(SignedRankTest {
        n_pairs: n,
        w_plus,
        w_minus,
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        method,
    })
}

fn exact_upper_tail(twice_ranks: &[u64], observed: u64) -> f64 {
    let total: u64 = twice_ranks.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in twice_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let tail: u64 = counts[observed as usize..].iter().sum();
    tail as f64 / (1u64 << twice_ranks.len()) as f64
}

fn normal_upper_tail(ranked: &SignedRanks, w_plus: f64) -> f64 {
    let n = ranked.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ranked
        .tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w_plus - mean - 0.5) / var.sqrt();
    Normal::standard().sf(z)
}

/// Matched-pairs rank-biserial correlation (simple-difference form):
/// (favourable rank sum − unfavourable rank sum) / total rank sum.
pub fn rank_biserial(diffs: &[f64]) -> Result<f64> {
    let ranked = signed_ranks(diffs)?;
    if ranked.is_empty() {
        return Err(Error::Degenerate(
            "all differences are zero; rank-biserial undefined".into(),
        ));
    }
    let (plus, minus) = ranked.rank_sums();
    Ok((plus - minus) / (plus + minus))
}

/// Share of strictly positive differences; zeros count as failures.
pub fn proportion_correct(diffs: &[f64]) -> Result<f64> {
    if diffs.is_empty() {
        return Err(Error::InvalidInput("no differences".into()));
    }
    let hits = diffs.iter().filter(|d| **d > 0.0).count();
    Ok(hits as f64 / diffs.len() as f64)
}

/// Proportion, signed-rank test and effect size for one comparison.
pub fn paired_comparison(comparison: Comparison, diffs: &[f64]) -> Result<TestResult> {
    let test = wilcoxon_one_sided(diffs)?;
    Ok(TestResult {
        comparison,
        n_total: diffs.len(),
        n_pairs: test.n_pairs,
        proportion_correct: proportion_correct(diffs)?,
        w_plus: test.w_plus,
        w_minus: test.w_minus,
        p_value: test.p_value,
        effect_size_d: rank_biserial(diffs)?,
        method: test.method,
    })
}
