//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped, absolute differences get midranks, and `W`
//! is the rank sum of the positive differences. For up to
//! [`EXACT_MAX_N`] non-zero pairs the two-sided p-value comes from the exact
//! null distribution of `W` over all `2^n` sign assignments; above that a
//! normal approximation with tie-corrected variance and a 0.5 continuity
//! correction is used.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::EvalError;

/// Largest effective sample size that uses the exact distribution.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences `b - a`.
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, plus the sizes of tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

struct Ranked {
    /// Midranks of |d| for the non-zero differences.
    ranks: Vec<f64>,
    positive: Vec<bool>,
    ties: Vec<usize>,
}

fn rank_differences(a: &[f64], b: &[f64]) -> Result<Ranked, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(EvalError::TooFewPairs { found: a.len() });
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| y - x)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(EvalError::AllZeroDifferences);
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(EvalError::NonFiniteScore { index: 0 });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    Ok(Ranked {
        ranks,
        positive: diffs.iter().map(|d| *d > 0.0).collect(),
        ties,
    })
}

fn statistic(r: &Ranked) -> f64 {
    r.ranks
        .iter()
        .zip(&r.positive)
        .filter(|(_, &p)| p)
        .map(|(r, _)| r)
        .sum()
}

/// Exact two-sided p-value for rank sum `w` given (mid)ranks.
///
/// Midranks are multiples of 1/2, so doubled ranks are integers and the null
/// distribution is a subset-sum count over them.
pub fn exact_p_value(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w).round() as usize;
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / total;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal-approximation two-sided p-value with tie correction and a 0.5
/// continuity correction.
pub fn normal_p_value(n: usize, ties: &[usize], w: f64) -> f64 {
    let n = n as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Paired test on `d_i = b_i - a_i`, choosing exact or approximate mode by size.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, EvalError> {
    let r = rank_differences(a, b)?;
    let w = statistic(&r);
    let n = r.ranks.len();
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        exact_p_value(&r.ranks, w)
    } else {
        normal_p_value(n, &r.ties, w)
    };
    Ok(WilcoxonResult {
        statistic: w,
        p_value,
        n_effective: n,
        exact,
    })
}

/// Same statistic, forced through the normal approximation.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, EvalError> {
    let r = rank_differences(a, b)?;
    let w = statistic(&r);
    Ok(WilcoxonResult {
        statistic: w,
        p_value: normal_p_value(r.ranks.len(), &r.ties, w),
        n_effective: r.ranks.len(),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_positive_diffs() {
        let r = wilcoxon_signed_rank(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.25).abs() < 1e-15);
        assert!(r.exact);
    }

    #[test]
    fn zero_diffs_rejected_or_dropped() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::AllZeroDifferences)
        ));
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(r.n_effective, 3);
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn midrank_ties() {
        let (r, t) = midranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(t, vec![2]);
    }

    #[test]
    fn balanced_signs_give_p_one() {
        let r = wilcoxon_signed_rank(&[0.0; 4], &[1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }
}
