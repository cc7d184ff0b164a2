use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, FeatureSampler, Tree};
use super::{ModelSpec, Result};
use crate::data::Dataset;
use crate::seed;

/// Bagged CART trees with per-split feature subsampling. The score is the
/// mean of the trees' leaf scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.score(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn features_per_split(spec: &ModelSpec, d: usize) -> usize {
    spec.rf
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d)
}

/// Trees are fitted in parallel; each draws from its own seed derived from
/// `(spec.seed, tree index)`, so the result does not depend on scheduling.
pub fn fit_forest(train: &Dataset, spec: &ModelSpec) -> Result<Forest> {
    let n = train.len();
    let per_split = features_per_split(spec, train.n_features());
    let trees = (0..spec.rf.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(spec.seed, &["tree".into(), t.into()]));
            let rows = if spec.rf.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(
                train,
                rows,
                &spec.dt,
                Some(FeatureSampler { rng, per_split }),
            )
        })
        .collect();
    Ok(Forest { trees })
}
