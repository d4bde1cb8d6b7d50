//! ROC/AUC, the one-sided Wilcoxon signed-rank test, matched-pairs
//! rank-biserial correlation and Cohen's kappa.

mod kappa;
mod roc;
mod signed_rank;

use serde::{Deserialize, Serialize};

pub use kappa::{cohen_kappa, confusion_matrix, ConfusionMatrix};
pub use roc::{mann_whitney_auc, roc_auc, trapezoid_area, RocResult};
pub use signed_rank::{
    paired_comparison, proportion_correct, rank_biserial, signed_ranks, wilcoxon_one_sided,
    SignedRankTest, TestMethod, TestResult, EXACT_MAX_PAIRS,
};

/// The two correct-vs-incorrect contrasts evaluated per model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    LtVsIlt,
    RcVsIrc,
}

impl Comparison {
    pub const ALL: [Comparison; 2] = [Comparison::LtVsIlt, Comparison::RcVsIrc];

    pub fn as_str(self) -> &'static str {
        match self {
            Comparison::LtVsIlt => "lt_vs_ilt",
            Comparison::RcVsIrc => "rc_vs_irc",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Comparison::LtVsIlt => "LT vs. ILT",
            Comparison::RcVsIrc => "RC vs. IRC",
        }
    }
}

/// Significance marker: `***` p<0.001, `**` p<0.01, `*` p<0.05, else `n.s.`.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "n.s."
    }
}
