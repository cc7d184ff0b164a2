//! Solow-Polasky diversity and greedy least-contribution selection.
//!
//! For a point set `S` the similarity matrix is `M_ij = exp(-theta * |s_i - s_j|)`
//! (plus `ridge` on the diagonal) and the diversity is the sum of all entries
//! of `M^-1`. Writing `M^-1` in block form around instance `i`, with `c̄` its
//! diagonal entry and `b̄` the rest of its column, the inverse of the kernel
//! without `i` is `Ā - b̄ b̄ᵀ / c̄`, and summing that identity gives
//!
//! ```text
//! D(S) - D(S \ {i}) = (Σ b̄ + c̄)² / c̄ = col_sum(i)² / (M^-1)_ii
//! ```
//!
//! so every contribution is read off the maintained inverse in O(1) once the
//! column sums are cached, and removing an instance is an O(n²) rank-one
//! downdate of the inverse instead of a fresh O(n³) inversion.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use thiserror::Error;

use crate::seed;

/// Default exponential decay rate of the similarity kernel.
pub const DEFAULT_THETA: f64 = 1.0;
/// Default diagonal regularizer, keeps near-duplicate kernels invertible.
pub const DEFAULT_RIDGE: f64 = 1e-9;
/// Downdates between scheduled re-factorizations of the inverse.
pub const REFACTOR_EVERY: usize = 500;
/// Contributions closer than this to the minimum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiversityError {
    #[error("SingularMatrix: similarity matrix is not positive definite (pivot {pivot}); remove duplicate points or use ridge > 0")]
    SingularMatrix { pivot: usize },
    #[error("NonFinitePoint: point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("DegenerateDiagonal: inverse diagonal {value} at original index {index} is not positive")]
    DegenerateDiagonal { index: usize, value: f64 },
    #[error("RTooLarge: cannot keep {keep} of {available} points")]
    RTooLarge { keep: usize, available: usize },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("EmptyPointSet: at least one point is required")]
    EmptyPointSet,
    #[error("NotAlive: original index {0} is not in the current set")]
    NotAlive(usize),
}

type Result<T> = std::result::Result<T, DiversityError>;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Kernel similarity between two points.
pub fn similarity(a: &[f64], b: &[f64], theta: f64) -> f64 {
    (-theta * euclidean(a, b)).exp()
}

/// Similarity matrix, its maintained inverse and cached inverse column sums
/// over the surviving subset of an original point set.
///
/// Storage is compact: surviving points occupy positions `0..len()`, and a
/// removal moves the last position into the freed slot. `alive()` maps
/// positions back to original indices.
#[derive(Debug, Clone)]
pub struct KernelInverseState {
    dim: usize,
    theta: f64,
    ridge: f64,
    /// Row-major points by position.
    points: Vec<f64>,
    /// Lower triangle of the symmetric inverse, packed by rows; see [`tri`].
    inv: Vec<f64>,
    col_sums: Vec<f64>,
    alive: Vec<usize>,
    position: HashMap<usize, usize>,
    downdates_since_refactor: usize,
    refactor_count: usize,
}

impl KernelInverseState {
    /// Convenience wrapper over [`build_kernel`] for row vectors.
    pub fn from_rows(rows: &[Vec<f64>], theta: f64, ridge: f64) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(DiversityError::InvalidParameter("ragged point rows".into()));
        }
        build_kernel(&rows.concat(), dim, theta, ridge)
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Original indices of the surviving points, in position order.
    pub fn alive(&self) -> &[usize] {
        &self.alive
    }

    /// Surviving original indices, ascending.
    pub fn alive_sorted(&self) -> Vec<usize> {
        let mut v = self.alive.clone();
        v.sort_unstable();
        v
    }

    pub fn position_of(&self, original: usize) -> Option<usize> {
        self.position.get(&original).copied()
    }

    pub fn point(&self, pos: usize) -> &[f64] {
        &self.points[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums[..self.len()]
    }

    pub fn inverse_entry(&self, i: usize, j: usize) -> f64 {
        self.inv[tri(i, j)]
    }

    /// The maintained inverse as dense rows, in position order.
    pub fn inverse_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        (0..m)
            .map(|i| (0..m).map(|j| self.inverse_entry(i, j)).collect())
            .collect()
    }

    /// The similarity matrix over surviving points, in position order.
    pub fn similarity_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        (0..m)
            .map(|i| (0..m).map(|j| self.similarity_at(i, j)).collect())
            .collect()
    }

    fn similarity_at(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0 + self.ridge
        } else {
            similarity(self.point(i), self.point(j), self.theta)
        }
    }

    /// `max |M · M^-1 - I|`. O(n³); meant for checks, not the hot path.
    pub fn inverse_residual(&self) -> f64 {
        let m = self.len();
        let sim = self.similarity_matrix();
        let mut worst: f64 = 0.0;
        for (i, srow) in sim.iter().enumerate() {
            for j in 0..m {
                let v: f64 = (0..m).map(|k| srow[k] * self.inverse_entry(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Number of from-scratch factorizations after the initial build.
    pub fn refactor_count(&self) -> usize {
        self.refactor_count
    }

    /// Solow-Polasky diversity: the sum of all entries of the inverse.
    pub fn diversity(&self) -> f64 {
        self.col_sums().iter().sum()
    }

    /// Diversity lost by removing each surviving point, by position.
    pub fn contributions(&mut self) -> Result<Vec<f64>> {
        match self.try_contributions() {
            Ok(c) => Ok(c),
            Err(DiversityError::DegenerateDiagonal { .. }) => {
                self.refactor()?;
                self.try_contributions()
            }
            Err(e) => Err(e),
        }
    }

    fn try_contributions(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|p| {
                let diag = self.inverse_entry(p, p);
                if diag > 0.0 && diag.is_finite() {
                    Ok(self.col_sums[p] * self.col_sums[p] / diag)
                } else {
                    Err(DiversityError::DegenerateDiagonal {
                        index: self.alive[p],
                        value: diag,
                    })
                }
            })
            .collect()
    }

    /// Removes the point with the given original index.
    pub fn remove_original(&mut self, original: usize) -> Result<()> {
        let pos = self
            .position_of(original)
            .ok_or(DiversityError::NotAlive(original))?;
        self.remove_at(pos)
    }

    /// Removes the point at position `pos` with a rank-one downdate of the
    /// inverse and an O(n) update of the column sums.
    pub fn remove_at(&mut self, pos: usize) -> Result<()> {
        let m = self.len();
        if pos >= m {
            return Err(DiversityError::NotAlive(pos));
        }
        if m == 1 {
            return Err(DiversityError::InvalidParameter(
                "cannot remove the last point".into(),
            ));
        }
        let healthy = |st: &Self| {
            let d = st.inverse_entry(pos, pos);
            d > 0.0 && d.is_finite()
        };
        if !healthy(self) {
            self.refactor()?;
            if !healthy(self) {
                return Err(DiversityError::DegenerateDiagonal {
                    index: self.alive[pos],
                    value: self.inverse_entry(pos, pos),
                });
            }
        }
        let diag = self.inverse_entry(pos, pos);
        let column: Vec<f64> = (0..m).map(|k| self.inverse_entry(k, pos)).collect();
        let sum_p = self.col_sums[pos];
        for i in 0..m {
            let f = column[i] / diag;
            if f != 0.0 {
                let start = tri(i, 0);
                let row = &mut self.inv[start..start + i + 1];
                for (x, b) in row.iter_mut().zip(&column) {
                    *x -= f * b;
                }
            }
            self.col_sums[i] -= column[i] * sum_p / diag;
        }
        self.swap_out(pos);
        self.downdates_since_refactor += 1;
        if self.downdates_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Moves the last position into `pos` and shrinks by one.
    fn swap_out(&mut self, pos: usize) {
        let m = self.len();
        let last = m - 1;
        let removed = self.alive[pos];
        self.position.remove(&removed);
        if pos != last {
            // Row `last` sits at the end of the packed buffer, past every
            // entry written here.
            let src = tri(last, 0);
            self.inv.copy_within(src..src + pos, tri(pos, 0));
            self.inv[tri(pos, pos)] = self.inv[tri(last, last)];
            for j in pos + 1..last {
                self.inv[tri(j, pos)] = self.inv[src + j];
            }
            self.col_sums[pos] = self.col_sums[last];
            let d = self.dim;
            self.points.copy_within(last * d..(last + 1) * d, pos * d);
            let moved = self.alive[last];
            self.alive[pos] = moved;
            self.position.insert(moved, pos);
        }
        self.alive.pop();
        self.inv.truncate(tri(last, 0));
        self.col_sums.truncate(last);
        self.points.truncate(last * self.dim);
    }

    /// Recomputes the inverse and column sums from scratch over survivors.
    pub fn refactor(&mut self) -> Result<()> {
        let m = self.len();
        let inv = invert_spd(&self.points[..m * self.dim], self.dim, self.theta, self.ridge)?;
        self.col_sums = column_sums(&inv, m);
        self.inv = inv;
        self.downdates_since_refactor = 0;
        self.refactor_count += 1;
        Ok(())
    }
}

/// Packed index of entry `(i, j)` of a symmetric matrix stored as its
/// lower triangle, row by row.
#[inline]
fn tri(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

fn column_sums(inv: &[f64], m: usize) -> Vec<f64> {
    let mut sums = vec![0.0; m];
    for i in 0..m {
        let row = &inv[tri(i, 0)..tri(i, 0) + i + 1];
        for (j, v) in row.iter().enumerate() {
            sums[i] += v;
            if j < i {
                sums[j] += v;
            }
        }
    }
    sums
}

/// Inverse of the similarity matrix of `points` via Cholesky, as a packed
/// lower triangle.
fn invert_spd(points: &[f64], dim: usize, theta: f64, ridge: f64) -> Result<Vec<f64>> {
    let m = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut sim = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        sim[(i, i)] = 1.0 + ridge;
        for j in 0..i {
            let v = similarity(row(i), row(j), theta);
            sim[(i, j)] = v;
            sim[(j, i)] = v;
        }
    }
    let chol = sim
        .cholesky()
        .ok_or(DiversityError::SingularMatrix { pivot: 0 })?;
    let l = chol.l_dirty();
    // Tiny pivots mean a numerically singular kernel even if the
    // factorization technically succeeded.
    if let Some(p) = (0..m).find(|&i| l[(i, i)].partial_cmp(&1e-12) != Some(std::cmp::Ordering::Greater)) {
        return Err(DiversityError::SingularMatrix { pivot: p });
    }
    let inv = chol.inverse();
    // Averaging the two triangles removes rounding asymmetry.
    let mut out = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        for j in 0..=i {
            out.push(0.5 * (inv[(i, j)] + inv[(j, i)]));
        }
    }
    Ok(out)
}

/// Builds the state over `n = points.len() / dim` row-major points.
pub fn build_kernel(points: &[f64], dim: usize, theta: f64, ridge: f64) -> Result<KernelInverseState> {
    if dim == 0 || points.is_empty() {
        return Err(DiversityError::EmptyPointSet);
    }
    if !points.len().is_multiple_of(dim) {
        return Err(DiversityError::InvalidParameter(
            "point buffer is not a whole number of rows".into(),
        ));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(DiversityError::InvalidParameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(DiversityError::InvalidParameter(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
        return Err(DiversityError::NonFinitePoint { index: pos / dim });
    }
    let n = points.len() / dim;
    let inv = invert_spd(points, dim, theta, ridge)?;
    Ok(KernelInverseState {
        dim,
        theta,
        ridge,
        points: points.to_vec(),
        col_sums: column_sums(&inv, n),
        inv,
        alive: (0..n).collect(),
        position: (0..n).map(|i| (i, i)).collect(),
        downdates_since_refactor: 0,
        refactor_count: 0,
    })
}

/// Sum of all entries of the maintained inverse.
pub fn solow_polasky(state: &KernelInverseState) -> f64 {
    state.diversity()
}

/// Per-position contributions, `col_sum² / diagonal`.
pub fn contributions(state: &mut KernelInverseState) -> Result<Vec<f64>> {
    if state.len() < 2 {
        return Err(DiversityError::InvalidParameter(
            "contributions need at least two points".into(),
        ));
    }
    state.contributions()
}

/// Consumes a state and returns it with original index `i` removed.
pub fn remove_and_downdate(mut state: KernelInverseState, i: usize) -> Result<KernelInverseState> {
    state.remove_original(i)?;
    Ok(state)
}

/// First occurrences of bitwise-equal rows are kept; returns (unique
/// original indices, duplicate original indices), both in insertion order.
pub fn split_duplicates(points: &[f64], dim: usize) -> (Vec<usize>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut dups = Vec::new();
    for (i, row) in points.chunks_exact(dim).enumerate() {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key, i).is_none() {
            unique.push(i);
        } else {
            dups.push(i);
        }
    }
    (unique, dups)
}

/// Diversity of a point set with exact duplicates collapsed first, so adding
/// a copy of an existing point leaves the value unchanged.
pub fn diversity_of(points: &[Vec<f64>], theta: f64, ridge: f64) -> Result<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let flat = points.concat();
    let (unique, _) = split_duplicates(&flat, dim);
    let rows: Vec<f64> = unique
        .iter()
        .flat_map(|&i| flat[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    Ok(build_kernel(&rows, dim, theta, ridge)?.diversity())
}

/// One greedy removal: the original index and its contribution at removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub index: usize,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Surviving original indices, ascending.
    pub kept_indices: Vec<usize>,
    pub removal_trace: Vec<Removal>,
    pub final_diversity: f64,
}

/// Greedy diversity selection: repeatedly discards the point with the least
/// contribution until `keep` points remain.
///
/// Exact duplicate rows are discarded first, in insertion order, each with
/// contribution 0. Tied minima are broken uniformly at random under `seed`.
pub fn greedy_select(
    points: &[Vec<f64>],
    keep: usize,
    theta: f64,
    ridge: f64,
    seed: u64,
) -> Result<SelectionResult> {
    let n = points.len();
    if n == 0 {
        return Err(DiversityError::EmptyPointSet);
    }
    if keep == 0 {
        return Err(DiversityError::InvalidParameter(
            "must keep at least one point".into(),
        ));
    }
    if keep > n {
        return Err(DiversityError::RTooLarge { keep, available: n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(DiversityError::InvalidParameter("ragged point rows".into()));
    }
    let flat = points.concat();
    let (unique, dups) = split_duplicates(&flat, dim);
    let mut to_remove = n - keep;

    let mut trace = Vec::with_capacity(to_remove);
    let mut kept_dups = Vec::new();
    for &d in &dups {
        if to_remove > 0 {
            trace.push(Removal {
                index: d,
                contribution: 0.0,
            });
            to_remove -= 1;
        } else {
            kept_dups.push(d);
        }
    }

    // Remaining duplicates (only when keep exceeds the unique count) are
    // carried along untouched; the kernel needs distinct rows.
    let unique_rows: Vec<f64> = unique
        .iter()
        .flat_map(|&i| flat[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    let mut state = build_kernel(&unique_rows, dim, theta, ridge)?;
    let mut rng = seed::rng(seed);
    while to_remove > 0 {
        let contrib = state.contributions()?;
        let pos = argmin_with_ties(&contrib, state.alive(), &mut rng);
        trace.push(Removal {
            index: unique[state.alive()[pos]],
            contribution: contrib[pos],
        });
        state.remove_at(pos)?;
        to_remove -= 1;
    }

    let mut kept: Vec<usize> = state.alive().iter().map(|&p| unique[p]).collect();
    kept.extend(kept_dups);
    kept.sort_unstable();
    Ok(SelectionResult {
        kept_indices: kept,
        removal_trace: trace,
        final_diversity: state.diversity(),
    })
}

/// Position of the minimum; ties (within [`TIE_TOLERANCE`]) are ordered by
/// label and one is drawn uniformly.
fn argmin_with_ties(values: &[f64], labels: &[usize], rng: &mut seed::Rng) -> usize {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut tied: Vec<usize> = (0..values.len())
        .filter(|&p| values[p] - min <= TIE_TOLERANCE)
        .collect();
    if tied.len() == 1 {
        return tied[0];
    }
    tied.sort_by_key(|&p| labels[p]);
    tied[rng.random_range(0..tied.len())]
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn singleton_kernel() {
        let s = build_kernel(&[0.3, 0.4], 2, 1.0, 0.5).unwrap();
        assert!((s.inverse_entry(0, 0) - 1.0 / 1.5).abs() < 1e-15);
        let s = build_kernel(&[0.3], 1, 1.0, 0.0).unwrap();
        assert!((s.diversity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_closed_form() {
        let mut s = build_kernel(&[0.0, LN2], 1, 1.0, 0.0).unwrap();
        let inv = s.inverse_matrix();
        assert!((inv[0][0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((inv[0][1] + 2.0 / 3.0).abs() < 1e-12);
        assert!((s.diversity() - 4.0 / 3.0).abs() < 1e-12);
        let c = contributions(&mut s).unwrap();
        assert!((c[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((c[1] - 1.0 / 3.0).abs() < 1e-12);
        let s = remove_and_downdate(s, 0).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.diversity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicates_without_ridge_are_singular() {
        assert!(matches!(
            build_kernel(&[1.0, 1.0], 1, 1.0, 0.0),
            Err(DiversityError::SingularMatrix { .. })
        ));
        assert!(matches!(
            build_kernel(&[1.0, f64::NAN], 1, 1.0, 0.0),
            Err(DiversityError::NonFinitePoint { index: 1 })
        ));
    }

    #[test]
    fn far_points_contribute_one() {
        let pts: Vec<f64> = (0..5).map(|i| 1000.0 * i as f64).collect();
        let mut s = build_kernel(&pts, 1, 1.0, 0.0).unwrap();
        for c in s.contributions().unwrap() {
            assert!((c - 1.0).abs() < 1e-12);
        }
        assert!((s.diversity() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_line_keeps_endpoints() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let r = greedy_select(&pts, 2, 1.0, 0.0, 0).unwrap();
        assert_eq!(r.kept_indices, vec![0, 2]);
        let e2 = (-2.0f64).exp();
        assert!((r.final_diversity - 2.0 / (1.0 + e2)).abs() < 1e-12);
        let all = greedy_select(&pts, 3, 1.0, 0.0, 0).unwrap();
        assert_eq!(all.kept_indices, vec![0, 1, 2]);
        assert!(all.removal_trace.is_empty());
    }

    #[test]
    fn greedy_removes_duplicates_first() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![5.0, 1.0],
            vec![0.0, 0.0],
            vec![-3.0, 2.0],
        ];
        let r = greedy_select(&pts, 3, 1.0, 0.0, 9).unwrap();
        let removed: Vec<usize> = r.removal_trace.iter().map(|x| x.index).collect();
        assert_eq!(removed, vec![1, 3]);
        assert_eq!(r.kept_indices, vec![0, 2, 4]);
        assert!(matches!(
            greedy_select(&pts, 6, 1.0, 0.0, 0),
            Err(DiversityError::RTooLarge { .. })
        ));
    }

    #[test]
    fn keep_exceeding_unique_count_keeps_copies() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let r = greedy_select(&pts, 3, 1.0, 0.0, 0).unwrap();
        assert_eq!(r.kept_indices.len(), 3);
        assert_eq!(r.removal_trace[0].index, 1);
    }
}
