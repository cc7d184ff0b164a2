//! Evaluation: PR curves and PR-AUC, the Wilcoxon signed-rank test, and the
//! repeated-experiment runner with its summary tables.

mod experiment;
mod metrics;
mod report;
mod wilcoxon;

pub use experiment::{
    run_experiment, run_experiment_with_threads, summarize, CellResult, Comparison,
    DatasetSource, ExperimentConfig, ExperimentResult, Level, MethodSpec, RunOptions, Summary,
    SummaryRow, SIGNIFICANCE_LEVEL,
};
pub use metrics::{confusion_at, pr_auc, pr_curve, Confusion, PrCurve, PrPoint};
pub use report::{curves_csv, raw_csv, summary_csv, text_tables};
pub use wilcoxon::{
    exact_p_value, midranks, normal_p_value, wilcoxon_normal, wilcoxon_signed_rank,
    WilcoxonResult, EXACT_MAX_N,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("LengthMismatch: {left} vs {right} values")]
    LengthMismatch { left: usize, right: usize },
    #[error("NoPositives: PR-AUC needs at least one positive label")]
    NoPositives,
    #[error("NonFiniteScore: score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("AllZeroDifferences: every paired difference is zero")]
    AllZeroDifferences,
    #[error("TooFewPairs: the signed-rank test needs at least 3 pairs, found {found}")]
    TooFewPairs { found: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}
