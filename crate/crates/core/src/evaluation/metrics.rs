//! Confusion counts, precision-recall curves and PR-AUC.
//!
//! PR-AUC is the step-wise average precision: scores are sorted descending,
//! tied scores form one threshold step, and the area is
//! `sum_k (R_k - R_{k-1}) * P_k` with `R_0 = 0`. No interpolation in PR space.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// `TP / (TP + FN)`, the share of actual positives that were flagged.
    pub fn recall(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    /// `TP / (TP + FP)`, the share of flagged instances that are positive.
    pub fn precision(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fp) as f64
    }
}

fn check_inputs(labels: &[u8], scores: &[f64]) -> Result<(), EvalError> {
    if labels.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            left: labels.len(),
            right: scores.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore { index: i });
    }
    Ok(())
}

/// Counts with "predict positive iff score >= threshold".
pub fn confusion_at(labels: &[u8], scores: &[f64], threshold: f64) -> Result<Confusion, EvalError> {
    check_inputs(labels, scores)?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&l, &s) in labels.iter().zip(scores) {
        match (l == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// One point per distinct score, thresholds descending, so recall is
/// non-decreasing and the last point has recall 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub positive_count: usize,
}

impl PrCurve {
    pub fn average_precision(&self) -> f64 {
        let mut prev = 0.0;
        let mut area = 0.0;
        for p in &self.points {
            area += (p.recall - prev) * p.precision;
            prev = p.recall;
        }
        area
    }
}

pub fn pr_curve(labels: &[u8], scores: &[f64]) -> Result<PrCurve, EvalError> {
    check_inputs(labels, scores)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if labels[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(PrPoint {
            threshold,
            recall: tp as f64 / positives as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    Ok(PrCurve {
        points,
        positive_count: positives,
    })
}

/// Area under the precision-recall curve (average precision).
pub fn pr_auc(labels: &[u8], scores: &[f64]) -> Result<f64, EvalError> {
    Ok(pr_curve(labels, scores)?.average_precision())
}
