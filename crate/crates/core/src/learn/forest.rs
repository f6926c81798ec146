use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dense::{argmax_first, Dense};
use super::tree::{Criterion, DecisionTree, MaxFeatures, TreeParams};
use crate::rng::{derive_seed, rng_from};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_classes: usize,
}

/// Bootstrap rows for tree `tree_index`: `n` draws with replacement.
pub fn bootstrap_indices(seed: u64, tree_index: usize, n: usize) -> Vec<usize> {
    let mut rng = rng_from(derive_seed(&[seed, tree_index as u64]));
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

impl RandomForest {
    pub fn fit(
        x: &Dense,
        y: &[usize],
        n_classes: usize,
        n_estimators: usize,
        max_depth: Option<usize>,
        max_features: MaxFeatures,
        seed: u64,
    ) -> Self {
        let n = x.n_rows();
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth,
            max_features,
        };
        let trees = (0..n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_from(derive_seed(&[seed, t as u64]));
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit(x, y, n_classes, &sample, params, Some(&mut rng))
            })
            .collect();
        Self { trees, n_classes }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict_row(row)] += 1.0;
        }
        argmax_first(&votes)
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Dense, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, ((i * 7) % 13) as f64, (i % 3) as f64])
            .collect();
        let y = (0..40).map(|i| usize::from(i >= 20)).collect();
        (Dense::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = toy();
        let a = RandomForest::fit(&x, &y, 2, 10, None, MaxFeatures::Sqrt, 9);
        let b = RandomForest::fit(&x, &y, 2, 10, None, MaxFeatures::Sqrt, 9);
        assert_eq!(a, b);
        let c = RandomForest::fit(&x, &y, 2, 10, None, MaxFeatures::Sqrt, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn single_tree_matches_tree_on_bootstrap() {
        let (x, y) = toy();
        let f = RandomForest::fit(&x, &y, 2, 1, Some(4), MaxFeatures::All, 3);
        let sample = bootstrap_indices(3, 0, x.n_rows());
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: Some(4),
            max_features: MaxFeatures::All,
        };
        let t = DecisionTree::fit(&x, &y, 2, &sample, params, None);
        assert_eq!(f.trees()[0], t);
    }

    #[test]
    fn vote_tie_goes_to_first_class() {
        let (x, y) = toy();
        let mut f = RandomForest::fit(&x, &y, 2, 1, Some(0), MaxFeatures::All, 1);
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: None,
            max_features: MaxFeatures::All,
        };
        let only0 = DecisionTree::fit(&x, &y, 2, &[0], params, None);
        let only1 = DecisionTree::fit(&x, &y, 2, &[39], params, None);
        f.trees = vec![only1, only0];
        assert_eq!(f.predict_row(x.row(5)), 0);
    }
}
