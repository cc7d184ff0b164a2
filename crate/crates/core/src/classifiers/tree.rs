//! CART with Gini impurity and Laplace-smoothed leaf scores.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{ModelSpec, Result, TreeParams};
use crate::data::Dataset;
use crate::seed;

/// Splits whose impurity decrease is at or below this are not taken.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        score: f64,
        count: usize,
        positives: usize,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

pub fn gini(positives: usize, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let p = positives as f64 / count as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Laplace-smoothed positive rate.
pub fn leaf_score(positives: usize, count: usize) -> f64 {
    (positives as f64 + 1.0) / (count as f64 + 2.0)
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { score, .. } => score,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Root split as `(feature, threshold)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Per-split feature subsampling used by the forest.
pub(crate) struct FeatureSampler {
    pub rng: seed::Rng,
    pub per_split: usize,
}

impl FeatureSampler {
    fn features(&mut self, d: usize) -> Vec<usize> {
        if self.per_split >= d {
            return (0..d).collect();
        }
        let mut f = index::sample(&mut self.rng, d, self.per_split).into_vec();
        f.sort_unstable();
        f
    }
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a TreeParams,
    sampler: Option<FeatureSampler>,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let count = idx.len();
        let positives = idx.iter().filter(|&&i| self.data.label(i) == 1).count();
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            score: leaf_score(positives, count),
            count,
            positives,
        });
        let pure = positives == 0 || positives == count;
        if pure || depth >= self.params.max_depth || count < 2 * self.params.min_leaf {
            return at;
        }
        let Some(best) = self.best_split(&idx, positives) else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.data.row(i)[best.feature] < best.threshold);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&mut self, idx: &[usize], positives: usize) -> Option<Best> {
        let n = idx.len();
        let parent = gini(positives, n);
        let min_leaf = self.params.min_leaf;
        let features = match self.sampler.as_mut() {
            Some(s) => s.features(self.data.n_features()),
            None => (0..self.data.n_features()).collect(),
        };
        let mut best: Option<Best> = None;
        let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in features {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.data.row(i)[f], self.data.label(i))));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(sorted[k - 1].1);
                let (lo, hi) = (sorted[k - 1].0, sorted[k].0);
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let right_pos = positives - left_pos;
                let decrease = parent
                    - (k as f64 / n as f64) * gini(left_pos, k)
                    - ((n - k) as f64 / n as f64) * gini(right_pos, n - k);
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some(Best {
                        feature: f,
                        threshold,
                        decrease,
                    });
                }
            }
        }
        best.filter(|b| b.decrease > MIN_DECREASE)
    }
}

pub(crate) fn build_tree(
    data: &Dataset,
    rows: Vec<usize>,
    params: &TreeParams,
    sampler: Option<FeatureSampler>,
) -> Tree {
    let mut b = Builder {
        data,
        params,
        sampler,
        nodes: Vec::new(),
    };
    b.grow(rows, 0);
    Tree { nodes: b.nodes }
}

pub fn fit_tree(train: &Dataset, spec: &ModelSpec) -> Result<Tree> {
    Ok(build_tree(train, (0..train.len()).collect(), &spec.dt, None))
}
