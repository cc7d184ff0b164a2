//! Repeated train/test experiments over datasets, imbalance levels,
//! re-sampling methods and classifiers.
//!
//! Each repetition of a (dataset, level) pair draws its level subsample and
//! split from seeds derived from the master seed and that identity only, so
//! every method and classifier in the repetition sees the same partition and
//! diversity/base pairs are properly paired for the signed-rank test. Units
//! of work are independent and run in parallel; the reduction is in config
//! order, so results do not depend on the thread count.

use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::metrics::{pr_curve, PrCurve};
use super::wilcoxon::wilcoxon_signed_rank;
use super::EvalError;
use crate::classifiers::{self, ModelSpec};
use crate::data::{self, format_float, Dataset};
use crate::error::{Error, Result};
use crate::resampling::{self, Method, ResamplePlan};
use crate::seed;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Csv {
        name: String,
        path: PathBuf,
        label_column: String,
        positive_value: String,
    },
    Synthetic {
        name: String,
        n_major: usize,
        n_minor: usize,
        dim: usize,
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSource {
    pub fn name(&self) -> &str {
        match self {
            DatasetSource::Csv { name, .. } | DatasetSource::Synthetic { name, .. } => name,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Csv {
                name,
                path,
                label_column,
                positive_value,
            } => Ok(Dataset::load_csv(path, label_column, positive_value)?
                .dataset
                .with_source_name(name.clone())),
            DatasetSource::Synthetic {
                name,
                n_major,
                n_minor,
                dim,
                separation,
                seed,
            } => Ok(
                data::generate_synthetic(*n_major, *n_minor, *dim, *separation, *seed)?
                    .with_source_name(name.clone()),
            ),
        }
    }
}

/// Imbalance level: the dataset as loaded, or a target minority fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    Original,
    Fraction(f64),
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Original => f.write_str("original"),
            Level::Fraction(x) => f.write_str(&format_float(*x)),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Level::Original => s.serialize_str("original"),
            Level::Fraction(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Value(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Name(s) if s == "original" => Ok(Level::Original),
            Repr::Name(s) => s
                .parse::<f64>()
                .map(Level::Fraction)
                .map_err(|_| serde::de::Error::custom(format!("unknown level '{s}'"))),
            Repr::Value(x) => Ok(Level::Fraction(x)),
        }
    }
}

/// A re-sampling method with its diversity flag and, for hybrids, an
/// optional size ratio overriding the config default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    #[serde(default)]
    pub diversity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_ratio: Option<f64>,
}

impl MethodSpec {
    pub fn new(method: Method, diversity: bool) -> Self {
        Self {
            method,
            diversity,
            size_ratio: None,
        }
    }

    /// Method name without the diversity marker, e.g. `osus@0.25`.
    pub fn base_key(&self) -> String {
        match self.size_ratio {
            Some(r) if self.method.is_hybrid() => format!("{}@{}", self.method, format_float(r)),
            _ => self.method.to_string(),
        }
    }

    pub fn label(&self) -> String {
        let base = self.base_key().to_uppercase();
        if self.diversity {
            format!("D-{base}")
        } else {
            base
        }
    }

    fn same_base(&self, other: &MethodSpec) -> bool {
        self.method == other.method && self.size_ratio == other.size_ratio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSource>,
    pub imbalance_levels: Vec<Level>,
    pub methods: Vec<MethodSpec>,
    pub classifiers: Vec<ModelSpec>,
    pub repetitions: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    /// z-score features on the training split before re-sampling and fitting.
    pub standardize: bool,
    pub target_balance: f64,
    pub hybrid_size_ratio: f64,
    pub smote_k: usize,
    pub surplus_factor: f64,
    pub theta: f64,
    pub ridge: f64,
    pub select_from_originals: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let plan = ResamplePlan::default();
        Self {
            datasets: Vec::new(),
            imbalance_levels: vec![Level::Original],
            methods: Vec::new(),
            classifiers: Vec::new(),
            repetitions: 30,
            train_fraction: 0.75,
            master_seed: 0,
            standardize: true,
            target_balance: plan.target_balance,
            hybrid_size_ratio: plan.hybrid_size_ratio,
            smote_k: plan.smote_k,
            surplus_factor: plan.surplus_factor,
            theta: plan.theta,
            ridge: plan.ridge,
            select_from_originals: plan.select_from_originals,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m).into());
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.datasets.is_empty() || self.methods.is_empty() || self.classifiers.is_empty() {
            return bad("datasets, methods and classifiers must be non-empty".into());
        }
        if self.imbalance_levels.is_empty() {
            return bad("imbalance_levels must be non-empty".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        for l in &self.imbalance_levels {
            if let Level::Fraction(x) = l {
                if !(*x > 0.0 && *x < 1.0) {
                    return bad(format!("imbalance level {x} outside (0, 1)"));
                }
            }
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.datasets {
            if !names.insert(d.name()) {
                return bad(format!("duplicate dataset name '{}'", d.name()));
            }
            if let DatasetSource::Csv { path, .. } = d {
                if !path.is_file() {
                    return bad(format!("dataset file {} not found", path.display()));
                }
            }
        }
        for c in &self.classifiers {
            c.validate()?;
        }
        for m in &self.methods {
            self.plan_for(m, 0).validate()?;
        }
        Ok(())
    }

    /// Re-sampling plan for one method with this config's shared parameters.
    pub fn plan_for(&self, m: &MethodSpec, seed: u64) -> ResamplePlan {
        ResamplePlan {
            method: m.method,
            diversity: m.diversity,
            target_balance: self.target_balance,
            hybrid_size_ratio: m.size_ratio.unwrap_or(self.hybrid_size_ratio),
            smote_k: self.smote_k,
            surplus_factor: self.surplus_factor,
            theta: self.theta,
            ridge: self.ridge,
            select_from_originals: self.select_from_originals,
            seed,
        }
    }

    /// Classifier labels, disambiguating repeated kinds as `knn#2` etc.
    pub fn classifier_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, c) in self.classifiers.iter().enumerate() {
            let kind = c.kind.as_str();
            let prior = self.classifiers[..i].iter().filter(|o| o.kind == c.kind).count();
            out.push(if prior == 0 {
                kind.to_string()
            } else {
                format!("{kind}#{}", prior + 1)
            });
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep every test-set PR curve in the result.
    pub collect_curves: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub dataset: String,
    pub level: Level,
    pub method: MethodSpec,
    pub classifier: String,
    /// One PR-AUC per repetition, in repetition order.
    pub samples: Vec<f64>,
    /// Fingerprint of each repetition's train/test partition.
    pub split_hashes: Vec<u64>,
    pub mean: f64,
    pub std: f64,
    pub curves: Vec<PrCurve>,
}

/// Signed-rank comparison of a diversity cell against its base method.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub dataset: String,
    pub level: Level,
    pub classifier: String,
    pub base: MethodSpec,
    pub diversity: MethodSpec,
    pub statistic: Option<f64>,
    /// `None` when the test is undefined (all differences zero, < 3 pairs).
    pub p_value: Option<f64>,
    pub n_effective: usize,
    pub base_mean: f64,
    pub diversity_mean: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub comparisons: Vec<Comparison>,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn hash_indices(train: &[usize], test: &[usize]) -> u64 {
    let mut h = seed::derive(0, &[train.len().into()]);
    for &i in train.iter().chain(test) {
        h = seed::derive(h, &[i.into()]);
    }
    h
}

struct UnitOutput {
    pr_auc: f64,
    split_hash: u64,
    curve: Option<PrCurve>,
}

struct Unit<'a> {
    dataset_idx: usize,
    level: Level,
    rep: usize,
    data: &'a Dataset,
}

fn run_unit(config: &ExperimentConfig, unit: &Unit<'_>, options: RunOptions) -> Result<Vec<UnitOutput>> {
    let name = config.datasets[unit.dataset_idx].name();
    let level_key = unit.level.to_string();
    let key = |stage: &'static str| -> Vec<seed::KeyPart<'_>> {
        vec![name.into(), level_key.as_str().into(), stage.into(), unit.rep.into()]
    };
    let annotate = |e: Error, what: String| {
        e.context(format!(
            "dataset {name}, level {level_key}, repetition {}{what}",
            unit.rep
        ))
    };

    let leveled = match unit.level {
        Level::Original => unit.data.clone(),
        Level::Fraction(f) => {
            let s = seed::derive(config.master_seed, &key("level"));
            data::apply_imbalance_level(unit.data, f, s)
                .map_err(|e| annotate(e.into(), String::new()))?
        }
    };
    let split_seed = seed::derive(config.master_seed, &key("split"));
    let split = data::stratified_split(&leveled, config.train_fraction, split_seed)
        .map_err(|e| annotate(e.into(), String::new()))?;
    let split_hash = hash_indices(&split.train_indices, &split.test_indices);
    let (train, test) = if config.standardize {
        let (_, t, mut rest) = data::standardize(&split.train, &[&split.test])
            .map_err(|e| annotate(e.into(), String::new()))?;
        (t, rest.remove(0))
    } else {
        (split.train, split.test)
    };

    let labels = config.classifier_labels();
    let mut out = Vec::with_capacity(config.methods.len() * config.classifiers.len());
    for m in &config.methods {
        let base_key = m.base_key();
        let resample_seed = seed::derive(
            config.master_seed,
            &[
                name.into(),
                level_key.as_str().into(),
                base_key.as_str().into(),
                "resample".into(),
                unit.rep.into(),
            ],
        );
        let plan = config.plan_for(m, resample_seed);
        let outcome = resampling::resample(&train, &plan)
            .map_err(|e| annotate(e.into(), format!(", method {}", m.label())))?;
        for (spec, label) in config.classifiers.iter().zip(&labels) {
            let model_seed = seed::derive(
                config.master_seed,
                &[
                    name.into(),
                    level_key.as_str().into(),
                    label.as_str().into(),
                    "model".into(),
                    unit.rep.into(),
                ],
            );
            let spec = ModelSpec {
                seed: model_seed,
                ..spec.clone()
            };
            let cell = |e: Error| annotate(e, format!(", method {}, classifier {label}", m.label()));
            let model = classifiers::fit(&outcome.dataset, &spec).map_err(|e| cell(e.into()))?;
            let scores = classifiers::predict_scores(&model, &test).map_err(|e| cell(e.into()))?;
            let curve = pr_curve(test.labels(), &scores).map_err(|e| cell(e.into()))?;
            out.push(UnitOutput {
                pr_auc: curve.average_precision(),
                split_hash,
                curve: options.collect_curves.then_some(curve),
            });
        }
    }
    Ok(out)
}

/// Runs every (dataset, level, method, classifier, repetition) cell on the
/// current rayon pool.
pub fn run_experiment(config: &ExperimentConfig, options: RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let datasets: Vec<Dataset> = config
        .datasets
        .iter()
        .map(|d| d.load().map_err(|e| e.context(format!("dataset {}", d.name()))))
        .collect::<Result<_>>()?;

    let mut units = Vec::new();
    for (dataset_idx, data) in datasets.iter().enumerate() {
        for &level in &config.imbalance_levels {
            for rep in 0..config.repetitions {
                units.push(Unit {
                    dataset_idx,
                    level,
                    rep,
                    data,
                });
            }
        }
    }
    let outputs: Vec<Vec<UnitOutput>> = units
        .par_iter()
        .map(|u| run_unit(config, u, options))
        .collect::<Result<_>>()?;

    let labels = config.classifier_labels();
    let per_unit = config.methods.len() * config.classifiers.len();
    let mut cells = Vec::new();
    for (dataset_idx, d) in config.datasets.iter().enumerate() {
        for (level_idx, &level) in config.imbalance_levels.iter().enumerate() {
            let first = (dataset_idx * config.imbalance_levels.len() + level_idx) * config.repetitions;
            let reps = &outputs[first..first + config.repetitions];
            for (mi, m) in config.methods.iter().enumerate() {
                for (ci, label) in labels.iter().enumerate() {
                    let slot = mi * config.classifiers.len() + ci;
                    debug_assert!(slot < per_unit);
                    let samples: Vec<f64> = reps.iter().map(|r| r[slot].pr_auc).collect();
                    let (mean, std) = mean_std(&samples);
                    cells.push(CellResult {
                        dataset: d.name().to_string(),
                        level,
                        method: *m,
                        classifier: label.clone(),
                        split_hashes: reps.iter().map(|r| r[slot].split_hash).collect(),
                        curves: reps.iter().filter_map(|r| r[slot].curve.clone()).collect(),
                        samples,
                        mean,
                        std,
                    });
                }
            }
        }
    }
    let comparisons = compare(&cells);
    Ok(ExperimentResult {
        config: config.clone(),
        cells,
        comparisons,
    })
}

/// Runs on a dedicated pool with `threads` workers.
pub fn run_experiment_with_threads(
    config: &ExperimentConfig,
    options: RunOptions,
    threads: usize,
) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::from(EvalError::InvalidConfig(format!("thread pool: {e}"))))?;
    pool.install(|| run_experiment(config, options))
}

fn compare(cells: &[CellResult]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for div in cells.iter().filter(|c| c.method.diversity) {
        let Some(base) = cells.iter().find(|b| {
            !b.method.diversity
                && b.method.same_base(&div.method)
                && b.dataset == div.dataset
                && b.level == div.level
                && b.classifier == div.classifier
        }) else {
            continue;
        };
        let test = wilcoxon_signed_rank(&base.samples, &div.samples).ok();
        let p_value = test.map(|t| t.p_value);
        out.push(Comparison {
            dataset: div.dataset.clone(),
            level: div.level,
            classifier: div.classifier.clone(),
            base: base.method,
            diversity: div.method,
            statistic: test.map(|t| t.statistic),
            p_value,
            n_effective: test.map_or(0, |t| t.n_effective),
            base_mean: base.mean,
            diversity_mean: div.mean,
            significant: is_significant(p_value, div.mean, base.mean),
        });
    }
    out
}

/// Marked when the test rejects at 0.05 and the diversity mean is higher.
pub fn is_significant(p_value: Option<f64>, diversity_mean: f64, base_mean: f64) -> bool {
    matches!(p_value, Some(p) if p < SIGNIFICANCE_LEVEL) && diversity_mean > base_mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub level: Level,
    pub method: MethodSpec,
    pub classifier: String,
    pub mean: f64,
    pub std: f64,
    pub wilcoxon_p: Option<f64>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

/// One row per cell; diversity cells carry their comparison against the base.
pub fn summarize(result: &ExperimentResult) -> Summary {
    let rows = result
        .cells
        .iter()
        .map(|c| {
            let cmp = result.comparisons.iter().find(|k| {
                k.diversity == c.method
                    && k.dataset == c.dataset
                    && k.level == c.level
                    && k.classifier == c.classifier
            });
            SummaryRow {
                dataset: c.dataset.clone(),
                level: c.level,
                method: c.method,
                classifier: c.classifier.clone(),
                mean: c.mean,
                std: c.std,
                wilcoxon_p: cmp.and_then(|k| k.p_value),
                significant: cmp.is_some_and(|k| k.significant),
            }
        })
        .collect();
    Summary { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significance_rule() {
        assert!(is_significant(Some(0.01), 0.737, 0.711));
        assert!(!is_significant(Some(0.04), 0.70, 0.71));
        assert!(!is_significant(Some(0.20), 0.80, 0.71));
        assert!(!is_significant(None, 0.80, 0.71));
    }

    #[test]
    fn level_serde() {
        let v: Vec<Level> = serde_json::from_str(r#"["original", 0.05, "0.01"]"#).unwrap();
        assert_eq!(v, vec![Level::Original, Level::Fraction(0.05), Level::Fraction(0.01)]);
        assert_eq!(serde_json::to_string(&v[..2]).unwrap(), r#"["original",0.05]"#);
    }

    #[test]
    fn config_defaults_and_unknown_fields() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"master_seed": 3}"#).unwrap();
        assert_eq!(c.repetitions, 30);
        assert_eq!(c.train_fraction, 0.75);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn method_labels() {
        assert_eq!(MethodSpec::new(Method::Rus, true).label(), "D-RUS");
        let m = MethodSpec {
            method: Method::Osus,
            diversity: false,
            size_ratio: Some(0.25),
        };
        assert_eq!(m.label(), "OSUS@0.25");
    }
}
