//! Independent reference implementations used by the integration tests.
//! None of these call into the library's numerical code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn kernel(points: &[Vec<f64>], theta: f64, ridge: f64) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (-theta * dist(&points[i], &points[j])).exp();
        }
        m[i][i] += ridge;
    }
    m
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle");
        for v in a[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Sum of all entries of the inverse kernel matrix.
pub fn sp_diversity(points: &[Vec<f64>], theta: f64, ridge: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    gauss_jordan_inverse(&kernel(points, theta, ridge))
        .iter()
        .flatten()
        .sum()
}

pub fn without(points: &[Vec<f64>], i: usize) -> Vec<Vec<f64>> {
    points
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i)
        .map(|(_, p)| p.clone())
        .collect()
}

/// `D(S) - D(S \ {i})` for every `i`, each by fresh inversion.
pub fn brute_contributions(points: &[Vec<f64>], theta: f64, ridge: f64) -> Vec<f64> {
    let full = sp_diversity(points, theta, ridge);
    (0..points.len())
        .map(|i| full - sp_diversity(&without(points, i), theta, ridge))
        .collect()
}

pub fn frobenius_relative(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    (num / den).sqrt()
}

/// All `r`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

pub fn pick(points: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| points[i].clone()).collect()
}

/// Average precision by re-scanning every instance at each distinct
/// threshold: O(n^2), no sorting of instances.
pub fn brute_average_precision(labels: &[u8], scores: &[f64]) -> f64 {
    let positives = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut thresholds: Vec<f64> = Vec::new();
    for &s in scores {
        if !thresholds.contains(&s) {
            thresholds.push(s);
        }
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0usize;
        let mut flagged = 0usize;
        for (l, s) in labels.iter().zip(scores) {
            if *s >= t {
                flagged += 1;
                if *l == 1 {
                    tp += 1;
                }
            }
        }
        let recall = tp as f64 / positives;
        let precision = tp as f64 / flagged as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Midranks by counting: rank = (#smaller) + (#equal + 1) / 2.
fn count_midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

/// Signed-rank statistic and exact two-sided p-value by listing all
/// `2^n` sign patterns.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> (f64, f64, usize) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).filter(|d| *d != 0.0).collect();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = count_midranks(&abs);
    let w: f64 = ranks.iter().zip(&d).filter(|(_, x)| **x > 0.0).map(|(r, _)| r).sum();
    let mut le = 0u64;
    let mut ge = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if s <= w + 1e-9 {
            le += 1;
        }
        if s >= w - 1e-9 {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    let p = (2.0 * (le.min(ge) as f64) / total).min(1.0);
    (w, p, n)
}

/// Weighted Gini decrease of splitting `rows` on `feature` at `threshold`.
pub fn gini_decrease(x: &[Vec<f64>], y: &[u8], rows: &[usize], feature: usize, threshold: f64) -> f64 {
    let g = |idx: &[usize]| {
        if idx.is_empty() {
            return 0.0;
        }
        let p = idx.iter().filter(|&&i| y[i] == 1).count() as f64 / idx.len() as f64;
        2.0 * p * (1.0 - p)
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] < threshold);
    let n = rows.len() as f64;
    g(rows) - (l.len() as f64 / n) * g(&l) - (r.len() as f64 / n) * g(&r)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}
