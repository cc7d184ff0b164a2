//! Score-producing binary classifiers: logistic GLM, k-nearest neighbours,
//! CART decision tree and random forest. Every model maps a feature row to a
//! score in `[0, 1]`.

mod forest;
mod glm;
mod knn;
mod tree;

pub use forest::{fit_forest, Forest};
pub use glm::{
    fit_glm, penalized_gradient, penalized_log_likelihood, GlmModel, INTERCEPT_NAME,
};
pub use knn::{fit_knn, KnnModel};
pub use tree::{fit_tree, Node, Tree};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Standardizer};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("SingleClassTrainingSet: training labels are all {label}")]
    SingleClassTrainingSet { label: u8 },
    #[error("KTooLarge: k={k} exceeds the {available} training rows")]
    KTooLarge { k: usize, available: usize },
    #[error("DimensionMismatch: model expects {expected} features, data has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("EmptyTrainingSet: no training rows")]
    EmptyTrainingSet,
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("InvalidCoefficients: {0}")]
    InvalidCoefficients(String),
}

type Result<T> = std::result::Result<T, ClassifierError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Glm,
    Knn,
    Dt,
    Rf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Glm => "glm",
            ModelKind::Knn => "knn",
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_uppercase())
    }
}

impl FromStr for ModelKind {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "glm" => Ok(ModelKind::Glm),
            "knn" => Ok(ModelKind::Knn),
            "dt" => Ok(ModelKind::Dt),
            "rf" => Ok(ModelKind::Rf),
            _ => Err(ClassifierError::InvalidSpec(format!("unknown classifier '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmParams {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub l2_ridge: f64,
}

impl Default for GlmParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-8,
            l2_ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 10,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub glm: GlmParams,
    pub knn: KnnParams,
    pub dt: TreeParams,
    pub rf: ForestParams,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::new(ModelKind::Glm)
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            glm: GlmParams::default(),
            knn: KnnParams::default(),
            dt: TreeParams::default(),
            rf: ForestParams::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ClassifierError::InvalidSpec(m.into()));
        if self.glm.max_iterations == 0 || !(self.glm.tolerance > 0.0) || !(self.glm.l2_ridge >= 0.0)
        {
            return bad("glm parameters must be positive");
        }
        if self.knn.k == 0 {
            return bad("knn k must be positive");
        }
        if self.dt.max_depth == 0 || self.dt.min_leaf == 0 {
            return bad("tree max_depth and min_leaf must be positive");
        }
        if self.rf.trees == 0 || self.rf.features_per_split == Some(0) {
            return bad("forest trees and features_per_split must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Glm(GlmModel),
    Knn(KnnModel),
    Tree(Tree),
    Forest(Forest),
}

/// A fitted classifier. When a standardizer is attached, raw rows are
/// transformed with it before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub model: Model,
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
}

impl TrainedModel {
    pub fn with_standardizer(mut self, s: Standardizer) -> Self {
        self.standardizer = Some(s);
        self
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        match &self.standardizer {
            Some(s) => self.score_prepared(&s.transform_row(row)),
            None => self.score_prepared(row),
        }
    }

    fn score_prepared(&self, row: &[f64]) -> f64 {
        match &self.model {
            Model::Glm(m) => m.score(row),
            Model::Knn(m) => m.score(row),
            Model::Tree(m) => m.score(row),
            Model::Forest(m) => m.score(row),
        }
    }

    pub fn as_glm(&self) -> Option<&GlmModel> {
        match &self.model {
            Model::Glm(m) => Some(m),
            _ => None,
        }
    }
}

fn check_trainable(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    Ok(())
}

/// Fits the classifier named by `spec.kind`.
pub fn fit(train: &Dataset, spec: &ModelSpec) -> Result<TrainedModel> {
    spec.validate()?;
    check_trainable(train)?;
    let model = match spec.kind {
        ModelKind::Glm => Model::Glm(fit_glm(train, spec)?),
        ModelKind::Knn => Model::Knn(fit_knn(train, spec)?),
        ModelKind::Dt => Model::Tree(fit_tree(train, spec)?),
        ModelKind::Rf => Model::Forest(fit_forest(train, spec)?),
    };
    Ok(TrainedModel {
        kind: spec.kind,
        model,
        n_features: train.n_features(),
        standardizer: None,
    })
}

/// One score per row of `data`.
pub fn predict_scores(model: &TrainedModel, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_features() != model.n_features {
        return Err(ClassifierError::DimensionMismatch {
            expected: model.n_features,
            found: data.n_features(),
        });
    }
    Ok(data.rows().map(|r| model.score_row(r)).collect())
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}
