use serde::{Deserialize, Serialize};

use super::FeatureMatrix;

/// Per-column bounds learnt from training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Scales one value of column `j`; constant columns map to 0 and the
    /// result is clipped to [0, 1].
    #[inline]
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            0.0
        } else {
            ((x - self.min[j]) / span).clamp(0.0, 1.0)
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &x)| self.scale(j, x)).collect()
    }
}

pub fn fit_minmax(train: &FeatureMatrix) -> MinMaxScaler {
    let d = train.n_cols();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for r in train.rows() {
        for (j, &v) in r.values.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if train.is_empty() {
        min.fill(0.0);
        max.fill(0.0);
    }
    MinMaxScaler { min, max }
}

pub fn apply_minmax(matrix: &FeatureMatrix, scaler: &MinMaxScaler) -> FeatureMatrix {
    let mut out = matrix.clone();
    for r in &mut out.rows {
        r.values = scaler.scale_row(&r.values);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;

    fn column(values: &[f64]) -> FeatureMatrix {
        let rows = values
            .iter()
            .enumerate()
            .map(|(i, &v)| FeatureVector {
                session_id: format!("r{i}"),
                ev_label: "x".into(),
                values: vec![v],
            })
            .collect();
        FeatureMatrix::new(vec!["f".into()], rows).unwrap()
    }

    fn scaled(m: &FeatureMatrix) -> Vec<f64> {
        m.rows().iter().map(|r| r.values[0]).collect()
    }

    #[test]
    fn affine_map() {
        let m = column(&[2.0, 4.0, 6.0]);
        let s = fit_minmax(&m);
        assert_eq!(scaled(&apply_minmax(&m, &s)), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = column(&[3.0, 3.0]);
        assert_eq!(scaled(&apply_minmax(&m, &fit_minmax(&m))), vec![0.0, 0.0]);
    }

    #[test]
    fn test_values_clipped() {
        let s = fit_minmax(&column(&[2.0, 6.0]));
        assert_eq!(scaled(&apply_minmax(&column(&[8.0, -1.0]), &s)), vec![1.0, 0.0]);
    }
}
