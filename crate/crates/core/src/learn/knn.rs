use serde::{Deserialize, Serialize};

use super::dense::{argmax_first, Dense};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weights {
    Uniform,
    Distance,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Cosine => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na.sqrt() * nb.sqrt())
                }
            }
        }
    }
}

/// Stored training set for nearest-neighbour voting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub metric: Metric,
    pub weights: Weights,
    pub n_classes: usize,
    train: Dense,
    y: Vec<usize>,
}

impl KnnModel {
    pub fn fit(k: usize, metric: Metric, weights: Weights, train: Dense, y: Vec<usize>, n_classes: usize) -> Self {
        Self {
            k,
            metric,
            weights,
            n_classes,
            train,
            y,
        }
    }

    pub fn predict_row(&self, q: &[f64]) -> usize {
        let n = self.train.n_rows();
        let k = self.k.min(n);
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|i| (self.metric.distance(q, self.train.row(i)), i))
            .collect();
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            d.select_nth_unstable_by(k - 1, by_dist);
            d.truncate(k);
        }
        d.sort_by(by_dist);
        let mut votes = vec![0.0; self.n_classes];
        match self.weights {
            Weights::Uniform => {
                for &(_, i) in &d {
                    votes[self.y[i]] += 1.0;
                }
            }
            Weights::Distance => {
                // exact matches outvote everything else
                if d.iter().any(|&(dist, _)| dist == 0.0) {
                    for &(dist, i) in &d {
                        if dist == 0.0 {
                            votes[self.y[i]] += 1.0;
                        }
                    }
                } else {
                    for &(dist, i) in &d {
                        votes[self.y[i]] += 1.0 / dist;
                    }
                }
            }
        }
        argmax_first(&votes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: usize, weights: Weights, xs: &[f64], y: &[usize]) -> KnnModel {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        KnnModel::fit(k, Metric::Euclidean, weights, Dense::from_rows(&rows).unwrap(), y.to_vec(), 2)
    }

    #[test]
    fn nearest_neighbour() {
        let m = model(1, Weights::Uniform, &[0.0, 10.0], &[0, 1]);
        assert_eq!(m.predict_row(&[1.0]), 0);
        assert_eq!(m.predict_row(&[9.0]), 1);
    }

    #[test]
    fn majority_of_three() {
        let m = model(3, Weights::Uniform, &[0.0, 1.0, 2.0, 50.0], &[0, 0, 1, 1]);
        assert_eq!(m.predict_row(&[1.0]), 0);
    }

    #[test]
    fn exact_match_dominates_distance_weights() {
        let m = model(3, Weights::Distance, &[5.0, 5.1, 5.2], &[1, 0, 0]);
        assert_eq!(m.predict_row(&[5.0]), 1);
    }

    #[test]
    fn tie_goes_to_smaller_class() {
        let m = model(2, Weights::Uniform, &[-1.0, 1.0], &[1, 0]);
        assert_eq!(m.predict_row(&[0.0]), 0);
    }

    #[test]
    fn cosine_zero_vector() {
        assert_eq!(Metric::Cosine.distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
        assert!(Metric::Cosine.distance(&[1.0, 1.0], &[2.0, 2.0]).abs() < 1e-12);
        assert_eq!(Metric::Manhattan.distance(&[0.0, 0.0], &[1.0, -2.0]), 3.0);
    }
}
