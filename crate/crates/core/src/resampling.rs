//! Random over/under-sampling, SMOTE and hybrid schemes, each with an
//! optional diversity selection stage.
//!
//! The diversity stage is a drop-in: it never changes the class counts a base
//! method would produce, only which rows survive. Over-sampling generates a
//! surplus of candidates with the base generator and keeps the most diverse
//! subset of the right size; under-sampling keeps the most diverse subset of
//! the class being reduced.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, Standardizer};
use crate::diversity::{self, DiversityError};
use crate::seed;

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("NoMinority: training set has no minority rows")]
    NoMinority,
    #[error("MajorityTooSmall: {available} majority rows cannot be reduced to {target}")]
    MajorityTooSmall { available: usize, target: usize },
    #[error("TooFewMinorityForK: SMOTE with k={k} needs at least {} minority rows, found {found}", k + 1)]
    TooFewMinorityForK { k: usize, found: usize },
    #[error("RatioInfeasible: {0}")]
    RatioInfeasible(String),
    #[error("InvalidPlan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Diversity(#[from] DiversityError),
    #[error(transparent)]
    Data(#[from] DataError),
}

type Result<T> = std::result::Result<T, ResampleError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// No re-sampling; the training set is used as-is.
    None,
    Ros,
    Rus,
    Smote,
    /// Hybrid: random over-sampling of the minority, under-sampling of the majority.
    Osus,
    /// Hybrid: SMOTE for the minority, under-sampling of the majority.
    Smoteus,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::None,
        Method::Ros,
        Method::Rus,
        Method::Smote,
        Method::Osus,
        Method::Smoteus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Ros => "ros",
            Method::Rus => "rus",
            Method::Smote => "smote",
            Method::Osus => "osus",
            Method::Smoteus => "smoteus",
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Method::Osus | Method::Smoteus)
    }

    /// Display label, e.g. `D-RUS` for the diversity variant of RUS.
    pub fn label(self, diversity: bool) -> String {
        let base = self.as_str().to_uppercase();
        if diversity {
            format!("D-{base}")
        } else {
            base
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = ResampleError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ResampleError::InvalidPlan(format!("unknown method '{s}'")))
    }
}

/// Everything that determines a re-sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResamplePlan {
    pub method: Method,
    pub diversity: bool,
    /// Minority:majority ratio after re-sampling (1.0 = balanced).
    pub target_balance: f64,
    /// Hybrid output size as a fraction of the training size.
    pub hybrid_size_ratio: f64,
    pub smote_k: usize,
    /// Candidate pool size multiplier for diversity over-sampling.
    pub surplus_factor: f64,
    pub theta: f64,
    pub ridge: f64,
    /// Let the diversity selector discard original minority rows too.
    pub select_from_originals: bool,
    pub seed: u64,
}

impl Default for ResamplePlan {
    fn default() -> Self {
        Self {
            method: Method::Ros,
            diversity: false,
            target_balance: 1.0,
            hybrid_size_ratio: 0.5,
            smote_k: 5,
            surplus_factor: 2.0,
            theta: diversity::DEFAULT_THETA,
            ridge: diversity::DEFAULT_RIDGE,
            select_from_originals: false,
            seed: 0,
        }
    }
}

impl ResamplePlan {
    pub fn new(method: Method, diversity: bool) -> Self {
        Self {
            method,
            diversity,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_size_ratio(mut self, r: f64) -> Self {
        self.hybrid_size_ratio = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.smote_k < 1 {
            return Err(ResampleError::InvalidPlan("smote_k must be at least 1".into()));
        }
        if !(self.surplus_factor >= 1.0 && self.surplus_factor.is_finite()) {
            return Err(ResampleError::InvalidPlan(format!(
                "surplus_factor must be >= 1, got {}",
                self.surplus_factor
            )));
        }
        if !(self.target_balance > 0.0 && self.target_balance.is_finite()) {
            return Err(ResampleError::InvalidPlan(format!(
                "target_balance must be positive, got {}",
                self.target_balance
            )));
        }
        if self.method.is_hybrid() && !(self.hybrid_size_ratio > 0.0 && self.hybrid_size_ratio <= 1.0)
        {
            return Err(ResampleError::InvalidPlan(format!(
                "hybrid_size_ratio must be in (0, 1], got {}",
                self.hybrid_size_ratio
            )));
        }
        if !(self.theta > 0.0) || !(self.ridge >= 0.0) {
            return Err(ResampleError::InvalidPlan("theta must be > 0 and ridge >= 0".into()));
        }
        Ok(())
    }

    /// Seed for a named sub-stage, so stages draw independent streams.
    fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive(self.seed, &[stage.into()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    OriginalMinority,
    OriginalMajority,
    Duplicated,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::OriginalMinority => "original-minority",
            Provenance::OriginalMajority => "original-majority",
            Provenance::Duplicated => "duplicated",
            Provenance::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampleOutcome {
    pub dataset: Dataset,
    pub provenance: Vec<Provenance>,
    /// Input row each output row copies; `None` for synthetic rows.
    pub origin: Vec<Option<usize>>,
    pub plan_echo: ResamplePlan,
}

impl ResampleOutcome {
    pub fn count(&self, tag: Provenance) -> usize {
        self.provenance.iter().filter(|&&p| p == tag).count()
    }

    /// Maps a re-sampling of standardized rows back to the raw scale of
    /// `raw`, the unstandardized input. Copied rows are restored bitwise from
    /// `raw`; synthetic rows are inverse-transformed.
    pub fn restore_scale(&self, raw: &Dataset, standardizer: &Standardizer) -> Result<Dataset> {
        let rows: Vec<Vec<f64>> = self
            .origin
            .iter()
            .zip(self.dataset.rows())
            .map(|(o, row)| match o {
                Some(i) => raw.row(*i).to_vec(),
                None => standardizer.inverse_row(row),
            })
            .collect();
        Ok(raw.with_rows(&rows, self.dataset.labels().to_vec())?)
    }
}

/// Rows under construction: (row, label, provenance, origin).
#[derive(Default)]
struct Assembly {
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
    provenance: Vec<Provenance>,
    origin: Vec<Option<usize>>,
}

impl Assembly {
    fn push_original(&mut self, train: &Dataset, i: usize) {
        let label = train.label(i);
        self.rows.push(train.row(i).to_vec());
        self.labels.push(label);
        self.provenance.push(if label == 1 {
            Provenance::OriginalMinority
        } else {
            Provenance::OriginalMajority
        });
        self.origin.push(Some(i));
    }

    fn push_candidate(&mut self, c: &Candidate) {
        self.rows.push(c.row.clone());
        self.labels.push(1);
        self.provenance.push(if c.origin.is_some() {
            Provenance::Duplicated
        } else {
            Provenance::Synthetic
        });
        self.origin.push(c.origin);
    }

    fn finish(self, train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
        Ok(ResampleOutcome {
            dataset: train.with_rows(&self.rows, self.labels)?,
            provenance: self.provenance,
            origin: self.origin,
            plan_echo: plan.clone(),
        })
    }
}

/// A generated minority row: a duplicate of input row `origin`, or synthetic.
#[derive(Debug, Clone)]
struct Candidate {
    row: Vec<f64>,
    origin: Option<usize>,
}

fn minority_target(train: &Dataset, plan: &ResamplePlan) -> usize {
    (plan.target_balance * train.majority_count() as f64).round() as usize
}

fn majority_target(train: &Dataset, plan: &ResamplePlan) -> usize {
    (train.minority_count() as f64 / plan.target_balance).round() as usize
}

/// Dispatches on the plan's method.
pub fn resample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    plan.validate()?;
    match plan.method {
        Method::None => identity(train, plan),
        Method::Ros | Method::Smote => {
            if plan.diversity {
                diversity_oversample(train, plan)
            } else if plan.method == Method::Ros {
                random_oversample(train, plan)
            } else {
                smote_oversample(train, plan)
            }
        }
        Method::Rus => {
            if plan.diversity {
                diversity_undersample(train, plan)
            } else {
                random_undersample(train, plan)
            }
        }
        Method::Osus | Method::Smoteus => hybrid_resample(train, plan),
    }
}

fn identity(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let mut out = Assembly::default();
    for i in 0..train.len() {
        out.push_original(train, i);
    }
    out.finish(train, plan)
}

/// Duplicates minority rows uniformly with replacement up to the target balance.
pub fn random_oversample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let minority = train.class_indices(1);
    if minority.is_empty() {
        return Err(ResampleError::NoMinority);
    }
    let needed = minority_target(train, plan).saturating_sub(minority.len());
    let mut rng = seed::rng(plan.seed);
    let candidates = ros_candidates(train, &minority, needed, &mut rng);
    assemble_oversampled(train, plan, &candidates)
}

fn ros_candidates(
    train: &Dataset,
    minority: &[usize],
    count: usize,
    rng: &mut seed::Rng,
) -> Vec<Candidate> {
    (0..count)
        .map(|_| {
            let i = minority[rng.random_range(0..minority.len())];
            Candidate {
                row: train.row(i).to_vec(),
                origin: Some(i),
            }
        })
        .collect()
}

fn assemble_oversampled(
    train: &Dataset,
    plan: &ResamplePlan,
    candidates: &[Candidate],
) -> Result<ResampleOutcome> {
    let mut out = Assembly::default();
    for i in 0..train.len() {
        out.push_original(train, i);
    }
    for c in candidates {
        out.push_candidate(c);
    }
    out.finish(train, plan)
}

/// Drops majority rows uniformly without replacement down to the target balance.
pub fn random_undersample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let target = majority_target(train, plan);
    let majority = train.class_indices(0);
    if target > majority.len() {
        return Err(ResampleError::MajorityTooSmall {
            available: majority.len(),
            target,
        });
    }
    let mut rng = seed::rng(plan.seed);
    let kept = random_subset(&majority, target, &mut rng);
    keep_rows(train, plan, 0, &kept)
}

fn random_subset(pool: &[usize], k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut picks: Vec<usize> = index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    picks.sort_unstable();
    picks
}

/// Keeps every row of the other class and only `kept` rows of `label`.
fn keep_rows(
    train: &Dataset,
    plan: &ResamplePlan,
    label: u8,
    kept: &[usize],
) -> Result<ResampleOutcome> {
    let mut keep: Vec<bool> = train.labels().iter().map(|&l| l != label).collect();
    for &i in kept {
        keep[i] = true;
    }
    let mut out = Assembly::default();
    for i in (0..train.len()).filter(|&i| keep[i]) {
        out.push_original(train, i);
    }
    out.finish(train, plan)
}

/// One SMOTE draw: `base + gap * (neighbor - base)`; indices refer to the
/// minority rows passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteSample {
    pub row: Vec<f64>,
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
}

/// `k` nearest other rows of each row (Euclidean, ties to the lower index).
fn nearest_neighbors(rows: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    rows.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| {
                    let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.truncate(k);
            others.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// SMOTE interpolation over explicit minority rows.
pub fn smote_from_rows(
    minority: &[Vec<f64>],
    n_synthetic: usize,
    k: usize,
    rng: &mut seed::Rng,
) -> Result<Vec<SmoteSample>> {
    if k == 0 {
        return Err(ResampleError::InvalidPlan("smote_k must be at least 1".into()));
    }
    if minority.len() < k + 1 {
        return Err(ResampleError::TooFewMinorityForK {
            k,
            found: minority.len(),
        });
    }
    if n_synthetic == 0 {
        return Ok(Vec::new());
    }
    let neighbors = nearest_neighbors(minority, k);
    Ok((0..n_synthetic)
        .map(|_| {
            let base = rng.random_range(0..minority.len());
            let neighbor = neighbors[base][rng.random_range(0..k)];
            let gap: f64 = rng.random();
            let p = &minority[base];
            let q = &minority[neighbor];
            let row = p.iter().zip(q).map(|(a, b)| a + gap * (b - a)).collect();
            SmoteSample {
                row,
                base,
                neighbor,
                gap,
            }
        })
        .collect())
}

/// SMOTE over the minority rows of a dataset.
pub fn smote_generate(
    train: &Dataset,
    n_synthetic: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<SmoteSample>> {
    let minority = train.class_rows(1);
    smote_from_rows(&minority, n_synthetic, k, &mut seed::rng(seed))
}

fn smote_candidates(
    train: &Dataset,
    count: usize,
    k: usize,
    rng: &mut seed::Rng,
) -> Result<Vec<Candidate>> {
    let minority = train.class_rows(1);
    if minority.is_empty() {
        return Err(ResampleError::NoMinority);
    }
    Ok(smote_from_rows(&minority, count, k, rng)?
        .into_iter()
        .map(|s| Candidate {
            row: s.row,
            origin: None,
        })
        .collect())
}

/// Plain SMOTE up to the target balance.
pub fn smote_oversample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let needed = minority_target(train, plan).saturating_sub(train.minority_count());
    let mut rng = seed::rng(plan.seed);
    let candidates = smote_candidates(train, needed, plan.smote_k, &mut rng)?;
    assemble_oversampled(train, plan, &candidates)
}

/// D-ROS / D-SMOTE: generate `ceil(surplus * g)` candidates with the base
/// generator and keep the `g` most diverse.
pub fn diversity_oversample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let minority = train.class_indices(1);
    if minority.is_empty() {
        return Err(ResampleError::NoMinority);
    }
    let needed = minority_target(train, plan).saturating_sub(minority.len());
    let mut rng = seed::rng(plan.seed);
    let (kept_originals, kept) =
        diverse_minority(train, plan, &minority, needed, minority.len() + needed, &mut rng)?;
    let mut out = Assembly::default();
    for i in 0..train.len() {
        if train.label(i) == 0 || kept_originals.contains(&i) {
            out.push_original(train, i);
        }
    }
    for c in &kept {
        out.push_candidate(c);
    }
    out.finish(train, plan)
}

/// Generates and selects minority candidates so `total` minority rows result.
/// Returns (original minority rows kept, candidates kept).
fn diverse_minority(
    train: &Dataset,
    plan: &ResamplePlan,
    minority: &[usize],
    needed: usize,
    total: usize,
    rng: &mut seed::Rng,
) -> Result<(Vec<usize>, Vec<Candidate>)> {
    if needed == 0 {
        return Ok((minority.to_vec(), Vec::new()));
    }
    let pool_size = (plan.surplus_factor * needed as f64).ceil() as usize;
    let pool = match plan.method {
        Method::Ros | Method::Osus => ros_candidates(train, minority, pool_size, rng),
        Method::Smote | Method::Smoteus => smote_candidates(train, pool_size, plan.smote_k, rng)?,
        m => {
            return Err(ResampleError::InvalidPlan(format!(
                "{m} has no over-sampling generator"
            )))
        }
    };
    if plan.select_from_originals {
        let mut points: Vec<Vec<f64>> = minority.iter().map(|&i| train.row(i).to_vec()).collect();
        points.extend(pool.iter().map(|c| c.row.clone()));
        let sel = diversity::greedy_select(&points, total, plan.theta, plan.ridge, plan.seed)?;
        let originals = sel
            .kept_indices
            .iter()
            .filter(|&&k| k < minority.len())
            .map(|&k| minority[k])
            .collect();
        let kept = sel
            .kept_indices
            .iter()
            .filter(|&&k| k >= minority.len())
            .map(|&k| pool[k - minority.len()].clone())
            .collect();
        Ok((originals, kept))
    } else {
        let points: Vec<Vec<f64>> = pool.iter().map(|c| c.row.clone()).collect();
        let sel = diversity::greedy_select(&points, needed, plan.theta, plan.ridge, plan.seed)?;
        Ok((
            minority.to_vec(),
            sel.kept_indices.iter().map(|&k| pool[k].clone()).collect(),
        ))
    }
}

/// D-RUS: keeps the most diverse majority subset of the target size.
pub fn diversity_undersample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    let target = majority_target(train, plan);
    let majority = train.class_indices(0);
    if target > majority.len() {
        return Err(ResampleError::MajorityTooSmall {
            available: majority.len(),
            target,
        });
    }
    let kept = diverse_subset(train, plan, &majority, target, plan.seed)?;
    keep_rows(train, plan, 0, &kept)
}

fn diverse_subset(
    train: &Dataset,
    plan: &ResamplePlan,
    pool: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k == pool.len() {
        return Ok(pool.to_vec());
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let points: Vec<Vec<f64>> = pool.iter().map(|&i| train.row(i).to_vec()).collect();
    let sel = diversity::greedy_select(&points, k, plan.theta, plan.ridge, seed)?;
    Ok(sel.kept_indices.iter().map(|&p| pool[p]).collect())
}

/// Per-class sizes of a hybrid re-sample: `(minority, majority)` with
/// `T = round(r * n)` split as `ceil(T/2)` / `floor(T/2)`.
pub fn hybrid_targets(n_train: usize, ratio: f64) -> Result<(usize, usize)> {
    let total = (ratio * n_train as f64).round() as usize;
    if ratio * (n_train as f64) < 4.0 || total < 4 {
        return Err(ResampleError::RatioInfeasible(format!(
            "ratio {ratio} of {n_train} rows leaves fewer than 4 rows"
        )));
    }
    Ok((total.div_ceil(2), total / 2))
}

/// OSUS / SMOTEUS and their diversity variants.
pub fn hybrid_resample(train: &Dataset, plan: &ResamplePlan) -> Result<ResampleOutcome> {
    if !plan.method.is_hybrid() {
        return Err(ResampleError::InvalidPlan(format!(
            "{} is not a hybrid method",
            plan.method
        )));
    }
    let (min_target, maj_target) = hybrid_targets(train.len(), plan.hybrid_size_ratio)?;
    let majority = train.class_indices(0);
    let minority = train.class_indices(1);
    if minority.is_empty() {
        return Err(ResampleError::NoMinority);
    }
    if maj_target > majority.len() {
        return Err(ResampleError::RatioInfeasible(format!(
            "majority target {maj_target} exceeds {} majority rows",
            majority.len()
        )));
    }

    let maj_seed = plan.stage_seed("majority");
    let kept_majority = if plan.diversity {
        diverse_subset(train, plan, &majority, maj_target, maj_seed)?
    } else {
        random_subset(&majority, maj_target, &mut seed::rng(maj_seed))
    };

    let min_seed = plan.stage_seed("minority");
    let mut min_rng = seed::rng(min_seed);
    let (kept_minority, candidates) = if min_target <= minority.len() {
        // Fewer minority rows wanted than present: reduce instead of grow.
        let kept = if plan.diversity {
            diverse_subset(train, plan, &minority, min_target, min_seed)?
        } else {
            random_subset(&minority, min_target, &mut min_rng)
        };
        (kept, Vec::new())
    } else {
        let needed = min_target - minority.len();
        if plan.diversity {
            let stage = ResamplePlan {
                seed: min_seed,
                ..plan.clone()
            };
            diverse_minority(train, &stage, &minority, needed, min_target, &mut min_rng)?
        } else {
            let c = match plan.method {
                Method::Osus => ros_candidates(train, &minority, needed, &mut min_rng),
                _ => smote_candidates(train, needed, plan.smote_k, &mut min_rng)?,
            };
            (minority.clone(), c)
        }
    };

    let mut keep = vec![false; train.len()];
    for &i in kept_majority.iter().chain(&kept_minority) {
        keep[i] = true;
    }
    let mut out = Assembly::default();
    for i in (0..train.len()).filter(|&i| keep[i]) {
        out.push_original(train, i);
    }
    for c in &candidates {
        out.push_candidate(c);
    }
    out.finish(train, plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(maj: usize, min: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..maj + min)
            .map(|i| vec![i as f64, (i * i % 7) as f64])
            .collect();
        let labels = (0..maj + min).map(|i| u8::from(i >= maj)).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn ros_counts() {
        let d = toy(10, 2);
        let out = resample(&d, &ResamplePlan::new(Method::Ros, false)).unwrap();
        assert_eq!(out.dataset.majority_count(), 10);
        assert_eq!(out.dataset.minority_count(), 10);
        assert_eq!(out.count(Provenance::Duplicated), 8);
        let balanced = toy(5, 5);
        let out = resample(&balanced, &ResamplePlan::new(Method::Ros, false)).unwrap();
        assert_eq!(out.dataset, balanced);
        assert_eq!(out.count(Provenance::Duplicated), 0);
    }

    #[test]
    fn rus_counts_and_subset() {
        let d = toy(100, 10);
        let out = resample(&d, &ResamplePlan::new(Method::Rus, false).with_seed(1)).unwrap();
        assert_eq!(out.dataset.majority_count(), 10);
        assert_eq!(out.dataset.minority_count(), 10);
        for (row, origin) in out.dataset.rows().zip(&out.origin) {
            assert_eq!(row, d.row(origin.unwrap()));
        }
        let other = resample(&d, &ResamplePlan::new(Method::Rus, false).with_seed(2)).unwrap();
        assert_ne!(out.origin, other.origin);
        let same = toy(10, 10);
        assert_eq!(
            resample(&same, &ResamplePlan::new(Method::Rus, false)).unwrap().dataset,
            same
        );
    }

    #[test]
    fn rus_majority_too_small() {
        let d = toy(3, 10);
        let err = resample(&d, &ResamplePlan::new(Method::Rus, false)).unwrap_err();
        assert!(matches!(err, ResampleError::MajorityTooSmall { .. }));
    }

    #[test]
    fn smote_two_points_on_diagonal() {
        let minority = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let s = smote_from_rows(&minority, 50, 1, &mut seed::rng(3)).unwrap();
        for x in s {
            assert_eq!(x.row[0], x.row[1]);
            assert!((0.0..=1.0).contains(&x.row[0]));
        }
    }

    #[test]
    fn smote_needs_k_plus_one() {
        let d = toy(10, 5);
        assert!(matches!(
            smote_generate(&d, 3, 5, 0),
            Err(ResampleError::TooFewMinorityForK { k: 5, found: 5 })
        ));
    }

    #[test]
    fn surplus_one_is_identity_selection() {
        let d = toy(30, 8);
        for method in [Method::Ros, Method::Smote] {
            let base = resample(&d, &ResamplePlan::new(method, false).with_seed(4)).unwrap();
            let mut plan = ResamplePlan::new(method, true).with_seed(4);
            plan.surplus_factor = 1.0;
            let div = resample(&d, &plan).unwrap();
            let key = |o: &ResampleOutcome| {
                let mut v: Vec<Vec<u64>> = o
                    .dataset
                    .rows()
                    .map(|r| r.iter().map(|x| x.to_bits()).collect())
                    .collect();
                v.sort();
                v
            };
            assert_eq!(key(&base), key(&div), "{method}");
        }
    }

    #[test]
    fn dros_keeps_one_copy_of_each() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![20.0]];
        let d = Dataset::from_rows(&rows, vec![0, 0, 0, 1, 1]).unwrap();
        let mut plan = ResamplePlan::new(Method::Ros, true).with_seed(0);
        plan.target_balance = 4.0 / 3.0; // 3 majority -> 4 minority, so g = 2
        plan.surplus_factor = 4.0;
        let out = resample(&d, &plan).unwrap();
        let mut added: Vec<f64> = out
            .dataset
            .rows()
            .zip(&out.provenance)
            .filter(|(_, p)| **p == Provenance::Duplicated)
            .map(|(r, _)| r[0])
            .collect();
        added.sort_by(f64::total_cmp);
        assert_eq!(added, vec![10.0, 20.0]);
    }

    #[test]
    fn drus_line_keeps_endpoints() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0], vec![50.0], vec![60.0]];
        let d = Dataset::from_rows(&rows, vec![0, 0, 0, 1, 1]).unwrap();
        let mut plan = ResamplePlan::new(Method::Rus, true);
        plan.ridge = 0.0;
        let out = resample(&d, &plan).unwrap();
        let origins: Vec<usize> = out.origin.iter().map(|o| o.unwrap()).collect();
        assert_eq!(origins, vec![0, 2, 3, 4]);
    }

    #[test]
    fn hybrid_sizes() {
        assert_eq!(hybrid_targets(1000, 0.25).unwrap(), (125, 125));
        assert_eq!(hybrid_targets(1000, 0.75).unwrap(), (375, 375));
        assert_eq!(hybrid_targets(101, 0.5).unwrap(), (26, 25));
        assert!(hybrid_targets(10, 0.3).is_err());
        let d = toy(970, 30);
        for diversity in [false, true] {
            let plan = ResamplePlan::new(Method::Osus, diversity).with_size_ratio(0.25);
            let out = resample(&d, &plan).unwrap();
            assert_eq!(out.dataset.majority_count(), 125);
            assert_eq!(out.dataset.minority_count(), 125);
        }
    }

    #[test]
    fn hybrid_reduces_minority_when_above_target() {
        let d = toy(60, 40);
        let plan = ResamplePlan::new(Method::Smoteus, true).with_size_ratio(0.5);
        let out = resample(&d, &plan).unwrap();
        assert_eq!(out.dataset.minority_count(), 25);
        assert_eq!(out.dataset.majority_count(), 25);
        assert_eq!(out.count(Provenance::Synthetic), 0);
    }
}
