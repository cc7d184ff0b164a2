use serde::{Deserialize, Serialize};

use super::{ClassifierError, ModelSpec, Result};
use crate::data::Dataset;

/// k-nearest-neighbour vote: the score is the positive fraction of the `k`
/// closest training rows (Euclidean, ties to the lower row index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<u8>,
}

impl KnnModel {
    pub fn score(&self, query: &[f64]) -> f64 {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dists.len() {
            dists.select_nth_unstable_by(self.k - 1, cmp);
        }
        let positives = dists[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i] == 1)
            .count();
        positives as f64 / self.k as f64
    }
}

pub fn fit_knn(train: &Dataset, spec: &ModelSpec) -> Result<KnnModel> {
    let k = spec.knn.k;
    if k > train.len() {
        return Err(ClassifierError::KTooLarge {
            k,
            available: train.len(),
        });
    }
    Ok(KnnModel {
        k,
        dim: train.n_features(),
        rows: train.features().to_vec(),
        labels: train.labels().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ModelKind;

    fn line() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        Dataset::from_rows(&rows, vec![1, 1, 1, 0, 0, 0, 0, 0]).unwrap()
    }

    #[test]
    fn vote_fraction() {
        let m = fit_knn(&line(), &ModelSpec::new(ModelKind::Knn)).unwrap();
        // nearest five to -1 are rows 0..5 with labels 1,1,1,0,0
        assert!((m.score(&[-1.0]) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn k1_returns_label() {
        let mut spec = ModelSpec::new(ModelKind::Knn);
        spec.knn.k = 1;
        let d = line();
        let m = fit_knn(&d, &spec).unwrap();
        for (i, row) in d.rows().enumerate() {
            assert_eq!(m.score(row), f64::from(d.label(i)));
        }
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let d = Dataset::from_rows(&[vec![-1.0], vec![1.0]], vec![1, 0]).unwrap();
        let mut spec = ModelSpec::new(ModelKind::Knn);
        spec.knn.k = 1;
        assert_eq!(fit_knn(&d, &spec).unwrap().score(&[0.0]), 1.0);
    }

    #[test]
    fn k_too_large() {
        let mut spec = ModelSpec::new(ModelKind::Knn);
        spec.knn.k = 9;
        assert!(matches!(
            fit_knn(&line(), &spec),
            Err(ClassifierError::KTooLarge { k: 9, available: 8 })
        ));
    }
}
