//! Dataset representation and the data-preparation stages of the pipeline:
//! CSV I/O, stratified splitting, imbalance-level manipulation,
//! standardization and synthetic two-cluster benchmarks.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// SMOTE with its default k = 5 needs at least six minority rows.
pub const MIN_MINORITY_AFTER_LEVEL: usize = 6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("Io: {path}: {message}")]
    Io { path: String, message: String },
    #[error("Csv: {path}: {message}")]
    Csv { path: String, message: String },
    #[error("MissingColumn: column '{column}' not found in header of {path}")]
    MissingColumn { column: String, path: String },
    #[error("NonNumericCell: row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("EmptyFile: {path} has no header or no data rows")]
    EmptyFile { path: String },
    #[error("SingleClassDataset: only label {label} present")]
    SingleClassDataset { label: u8 },
    #[error("ClassTooSmall: class {label} has {count} instance(s), at least 2 required")]
    ClassTooSmall { label: u8, count: usize },
    #[error("LevelNotBelowCurrent: requested level {level} is not below the current minority fraction {current:.4}")]
    LevelNotBelowCurrent { level: f64, current: f64 },
    #[error("TooFewMinorityRemaining: level would keep {kept} minority rows, at least {required} required")]
    TooFewMinorityRemaining { kept: usize, required: usize },
    #[error("DimensionMismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("InvalidDataset: {0}")]
    InvalidDataset(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}

/// Binary-labelled feature matrix. Label 1 is the minority (positive) class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_cols: usize,
    features: Vec<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    label_name: String,
    source_name: String,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(
        features: Vec<f64>,
        n_cols: usize,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        source_name: impl Into<String>,
    ) -> Result<Self, DataError> {
        if n_cols == 0 {
            return Err(DataError::InvalidDataset("no feature columns".into()));
        }
        if labels.is_empty() {
            return Err(DataError::InvalidDataset("no rows".into()));
        }
        if features.len() != labels.len() * n_cols {
            return Err(DataError::InvalidDataset(format!(
                "feature buffer has {} values, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                n_cols
            )));
        }
        if feature_names.len() != n_cols {
            return Err(DataError::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                n_cols
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::InvalidDataset(format!(
                    "duplicate feature name '{name}'"
                )));
            }
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(DataError::InvalidDataset(format!("label {l} is not binary")));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(DataError::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / n_cols,
                pos % n_cols
            )));
        }
        Ok(Self {
            n_cols,
            features,
            labels,
            feature_names,
            label_name: "label".into(),
            source_name: source_name.into(),
        })
    }

    /// Builds a dataset from rows, naming features `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self, DataError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(DataError::InvalidDataset("ragged rows".into()));
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        Self::new(rows.concat(), n_cols, labels, names, "inline")
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Self {
        self.source_name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_cols)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn minority_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn majority_count(&self) -> usize {
        self.len() - self.minority_count()
    }

    pub fn minority_fraction(&self) -> f64 {
        self.minority_count() as f64 / self.len() as f64
    }

    /// Original row indices carrying `label`, ascending.
    pub fn class_indices(&self, label: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Rows of one class as owned vectors.
    pub fn class_rows(&self, label: u8) -> Vec<Vec<f64>> {
        self.class_indices(label)
            .into_iter()
            .map(|i| self.row(i).to_vec())
            .collect()
    }

    /// New dataset made of the given rows, in the given order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            n_cols: self.n_cols,
            features,
            labels,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            source_name: self.source_name.clone(),
        }
    }

    /// Same schema, new rows. Rows must have this dataset's width.
    pub fn with_rows(&self, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Dataset, DataError> {
        if let Some(r) = rows.iter().find(|r| r.len() != self.n_cols) {
            return Err(DataError::DimensionMismatch {
                expected: self.n_cols,
                found: r.len(),
            });
        }
        Dataset::new(
            rows.concat(),
            self.n_cols,
            labels,
            self.feature_names.clone(),
            self.source_name.clone(),
        )
        .map(|d| d.with_label_name(self.label_name.clone()))
    }

    /// Reads a CSV with a header row from disk.
    pub fn load_csv(
        path: impl AsRef<Path>,
        label_column: &str,
        positive_value: &str,
    ) -> Result<LoadReport, DataError> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = File::open(path).map_err(|e| DataError::Io {
            path: display.clone(),
            message: e.to_string(),
        })?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| display.clone());
        Self::read_csv(file, &display, label_column, positive_value)
            .map(|r| LoadReport {
                dataset: r.dataset.with_source_name(stem),
                warnings: r.warnings,
            })
    }

    /// Reads CSV from any reader; `origin` is used in error messages.
    pub fn read_csv<R: Read>(
        reader: R,
        origin: &str,
        label_column: &str,
        positive_value: &str,
    ) -> Result<LoadReport, DataError> {
        let csv_err = |e: csv::Error| DataError::Csv {
            path: origin.to_string(),
            message: e.to_string(),
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(DataError::EmptyFile {
                path: origin.into(),
            });
        }
        let label_idx = header
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| DataError::MissingColumn {
                column: label_column.into(),
                path: origin.into(),
            })?;
        let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| j != label_idx).collect();
        let feature_names: Vec<String> =
            feature_cols.iter().map(|&j| header[j].to_string()).collect();

        let positive = positive_value.trim();
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            for &j in &feature_cols {
                let cell = &record[j];
                let value = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DataError::NonNumericCell {
                        row: r + 1,
                        column: header[j].to_string(),
                        value: cell.to_string(),
                    })?;
                features.push(value);
            }
            labels.push(u8::from(&record[label_idx] == positive));
        }
        if labels.is_empty() {
            return Err(DataError::EmptyFile {
                path: origin.into(),
            });
        }
        let dataset = Dataset::new(
            features,
            feature_cols.len(),
            labels,
            feature_names,
            origin.to_string(),
        )?
        .with_label_name(label_column);
        let mut warnings = Vec::new();
        let minority = dataset.minority_count();
        if minority == 0 || minority == dataset.len() {
            let label = u8::from(minority > 0);
            log::warn!("{origin}: single-class dataset (label {label})");
            warnings.push(DataError::SingleClassDataset { label });
        }
        Ok(LoadReport { dataset, warnings })
    }

    /// Writes the dataset as CSV, label column last. `extra` appends one more
    /// string column (e.g. provenance tags) after the label.
    pub fn write_csv<W: Write>(
        &self,
        writer: W,
        extra: Option<(&str, &[String])>,
    ) -> Result<(), DataError> {
        let err = |e: csv::Error| DataError::Csv {
            path: "<output>".into(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.label_name);
        if let Some((name, _)) = extra {
            header.push(name);
        }
        w.write_record(&header).map_err(err)?;
        let mut buf: Vec<String> = Vec::with_capacity(self.n_cols + 2);
        for (i, row) in self.rows().enumerate() {
            buf.clear();
            buf.extend(row.iter().map(|v| format_float(*v)));
            buf.push(self.labels[i].to_string());
            if let Some((_, col)) = extra {
                buf.push(col[i].clone());
            }
            w.write_record(&buf).map_err(err)?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: "<output>".into(),
            message: e.to_string(),
        })
    }
}

/// Shortest representation that round-trips through `f64::from_str`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Result of [`Dataset::load_csv`]: the data plus non-fatal warnings.
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub warnings: Vec<DataError>,
}

/// Output of [`stratified_split`]. Index lists refer to rows of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Largest-remainder apportionment of `round(fraction * sum(counts))` seats
/// across classes with the given sizes. Floors first; leftover seats go by
/// descending fractional remainder, ties to the larger class, then to the
/// lower class position.
pub fn apportion(counts: &[usize], fraction: f64) -> Vec<usize> {
    const TIE_EPS: f64 = 1e-9;
    let total: usize = counts.iter().sum();
    let seats = (fraction * total as f64).round() as usize;
    let quotas: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        if (ra - rb).abs() > TIE_EPS {
            rb.total_cmp(&ra)
        } else {
            counts[b].cmp(&counts[a]).then(a.cmp(&b))
        }
    });
    for &c in order.iter().cycle().take(seats.saturating_sub(assigned)) {
        out[c] += 1;
    }
    out
}

/// Per-class stratified split with largest-remainder class counts.
pub fn stratified_split(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitResult, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let classes = [d.class_indices(0), d.class_indices(1)];
    for (label, idx) in classes.iter().enumerate() {
        if idx.len() < 2 {
            return Err(DataError::ClassTooSmall {
                label: label as u8,
                count: idx.len(),
            });
        }
    }
    let counts = [classes[0].len(), classes[1].len()];
    let train_counts = apportion(&counts, train_fraction);

    let mut rng = seed::rng(seed);
    let mut train_indices = Vec::new();
    let mut test_indices = Vec::new();
    for (idx, &k) in classes.iter().zip(&train_counts) {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut rng);
        train_indices.extend_from_slice(&shuffled[..k]);
        test_indices.extend_from_slice(&shuffled[k..]);
    }
    train_indices.sort_unstable();
    test_indices.sort_unstable();
    Ok(SplitResult {
        train: d.select(&train_indices),
        test: d.select(&test_indices),
        train_indices,
        test_indices,
        seed,
    })
}

/// Minority count that makes the minority a `level` share of the dataset
/// when all `majority` rows are kept.
pub fn minority_target_for_level(level: f64, majority: usize) -> usize {
    (level / (1.0 - level) * majority as f64).round() as usize
}

/// Down-samples the minority class so it makes up `level` of the dataset.
pub fn apply_imbalance_level(d: &Dataset, level: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "imbalance level {level} outside (0, 1)"
        )));
    }
    let current = d.minority_fraction();
    if level >= current {
        return Err(DataError::LevelNotBelowCurrent { level, current });
    }
    let minority = d.class_indices(1);
    let kept = minority_target_for_level(level, d.majority_count());
    if kept < MIN_MINORITY_AFTER_LEVEL {
        return Err(DataError::TooFewMinorityRemaining {
            kept,
            required: MIN_MINORITY_AFTER_LEVEL,
        });
    }
    let mut rng = seed::rng(seed);
    let mut keep = vec![true; d.len()];
    for &i in &minority {
        keep[i] = false;
    }
    for pick in index::sample(&mut rng, minority.len(), kept) {
        keep[minority[pick]] = true;
    }
    let indices: Vec<usize> = (0..d.len()).filter(|&i| keep[i]).collect();
    Ok(d.select(&indices))
}

/// Per-feature z-score parameters fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant feature.
    pub stds: Vec<f64>,
}

impl Standardizer {
    const CONSTANT_EPS: f64 = 1e-12;

    pub fn fit(train: &Dataset) -> Self {
        let n = train.len() as f64;
        let d = train.n_features();
        let mut means = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds = vars
            .into_iter()
            .zip(&means)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= Self::CONSTANT_EPS * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self { means, stds }
    }

    fn scale(&self, j: usize) -> f64 {
        if self.stds[j] > 0.0 {
            self.stds[j]
        } else {
            1.0
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.means[j]) / self.scale(j))
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| v * self.scale(j) + self.means[j])
            .collect()
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset, DataError> {
        self.map_rows(d, Self::transform_row)
    }

    pub fn inverse_transform(&self, d: &Dataset) -> Result<Dataset, DataError> {
        self.map_rows(d, Self::inverse_row)
    }

    fn map_rows(
        &self,
        d: &Dataset,
        f: impl Fn(&Self, &[f64]) -> Vec<f64>,
    ) -> Result<Dataset, DataError> {
        if d.n_features() != self.means.len() {
            return Err(DataError::DimensionMismatch {
                expected: self.means.len(),
                found: d.n_features(),
            });
        }
        let mut out = d.clone();
        out.features = d.rows().flat_map(|r| f(self, r)).collect();
        Ok(out)
    }
}

/// Fits a [`Standardizer`] on `train` and applies it to `train` and `others`.
pub fn standardize(
    train: &Dataset,
    others: &[&Dataset],
) -> Result<(Standardizer, Dataset, Vec<Dataset>), DataError> {
    let s = Standardizer::fit(train);
    let t = s.transform(train)?;
    let rest = others
        .iter()
        .map(|d| s.transform(d))
        .collect::<Result<_, _>>()?;
    Ok((s, t, rest))
}

/// Two unit-variance isotropic Gaussian clusters; the minority centre sits
/// `separation` away from the origin along the first axis. Majority rows
/// come first.
pub fn generate_synthetic(
    n_major: usize,
    n_minor: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n_major == 0 || n_minor == 0 || dim == 0 {
        return Err(DataError::InvalidArgument(
            "synthetic counts and dimension must be at least 1".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "separation {separation} must be finite and non-negative"
        )));
    }
    let mut rng = seed::rng(seed);
    let n = n_major + n_minor;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let minority = i >= n_major;
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            let shift = if minority && j == 0 { separation } else { 0.0 };
            features.push(z + shift);
        }
        labels.push(u8::from(minority));
    }
    let names = (0..dim).map(|j| format!("x{j}")).collect();
    Dataset::new(
        features,
        dim,
        labels,
        names,
        format!("synthetic_{n_major}_{n_minor}_{dim}_{separation}"),
    )
}
